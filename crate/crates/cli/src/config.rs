//! Config-file schema. Every key mirrors a command-line flag of the same name
//! (with `-` replaced by `_`); a flag given on the command line wins.
//!
//! ```toml
//! frames = "data/interaction/frames"   # PNG directory
//! flow_dir = "data/interaction/flow"   # .flo directory (instead of frames)
//! fps = 30.0
//! mask = "mask.png"
//! roi = "10,10,12,12"
//! k = 20
//! skip_dc = true
//! band = "first"                        # first | top
//! weighting = "none"                    # none | contrast | gaussian
//! accumulate = false                    # chain frame-to-frame flow
//! mode = "disp"                         # accel | vel | disp
//! correction = "sinc2"                  # identity | sinc2
//! rtol = 1e-6
//! aggregation = "area"                  # area | mean
//! stride = 4
//! modes = "out/modes.msh1"
//! prediction = "out/contact.csv"
//! reference = "data/interaction/force.csv"
//! camera = "camera.toml"
//! max_lag = 60
//! scenario = "interaction"              # baseline | interaction
//! seed = 2
//! render = true
//! out = "out"
//!
//! [synth]                               # any SynthConfig field
//! grid = 48
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub frames: Option<PathBuf>,
    pub flow_dir: Option<PathBuf>,
    pub fps: Option<f64>,
    pub mask: Option<PathBuf>,
    pub roi: Option<String>,
    pub k: Option<usize>,
    pub skip_dc: Option<bool>,
    pub band: Option<String>,
    pub weighting: Option<String>,
    pub accumulate: Option<bool>,
    pub mode: Option<String>,
    pub correction: Option<String>,
    pub rtol: Option<f64>,
    pub aggregation: Option<String>,
    pub stride: Option<usize>,
    pub modes: Option<PathBuf>,
    pub prediction: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub camera: Option<PathBuf>,
    pub max_lag: Option<usize>,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub render: Option<bool>,
    pub out: Option<PathBuf>,
    pub synth: Option<toml::Table>,
}

impl PipelineConfig {
    /// Relative paths inside the file resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.frames,
            &mut cfg.flow_dir,
            &mut cfg.mask,
            &mut cfg.modes,
            &mut cfg.prediction,
            &mut cfg.reference,
            &mut cfg.camera,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Flag value if given, else config value.
pub fn pick<T: Clone>(flag: &Option<T>, config: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| config.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("run.toml");
        std::fs::write(&path, "out = \"o\"\nmask = \"/abs/m.png\"\nk = 4\n").unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.out, Some(tmp.path().join("o")));
        assert_eq!(cfg.mask, Some(PathBuf::from("/abs/m.png")));
        assert_eq!(cfg.k, Some(4));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("run.toml");
        std::fs::write(&path, "kk = 4\n").unwrap();
        assert!(PipelineConfig::load(&path).is_err());
    }

    #[test]
    fn flag_wins() {
        assert_eq!(pick(&Some(3), &Some(5)), Some(3));
        assert_eq!(pick(&None, &Some(5)), Some(5));
        assert_eq!(pick::<u8>(&None, &None), None);
    }
}
