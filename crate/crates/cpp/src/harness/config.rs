//! Line-oriented configuration files: UTF-8 `key = value` pairs with `#`
//! comments. Every key mirrors a CLI flag; values given on the command line
//! win over the file.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, Mix};

/// Partial configuration collected from a file or from CLI flags; `None`
/// fields leave the underlying value untouched when applied.
#[derive(Clone, Debug, Default)]
pub struct ConfigOverlay {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub agents: Option<usize>,
    pub alpha: Option<f64>,
    pub r2: Option<f64>,
    /// `Some(None)` selects all mixes; `Some(Some(m))` one mix.
    pub mix: Option<Option<Mix>>,
    pub rho_p: Option<f64>,
    pub rho_d: Option<f64>,
    pub rho_x: Option<f64>,
    pub all_presets: Option<bool>,
    pub accelerate: Option<bool>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub emit_plot_script: Option<bool>,
}

impl ConfigOverlay {
    /// Parses a configuration file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut overlay = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            overlay.set(key.trim(), value.trim()).map_err(|e| {
                Error::InvalidConfig(format!("line {}: {e}", lineno + 1))
            })?;
        }
        Ok(overlay)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value '{value}' for key '{key}'")))
        }
        match key {
            "seed" => self.seed = Some(parse(key, value)?),
            "n" => self.n = Some(parse(key, value)?),
            "agents" => self.agents = Some(parse(key, value)?),
            "alpha" => self.alpha = Some(parse(key, value)?),
            "r2" => self.r2 = Some(parse(key, value)?),
            "mix" => {
                self.mix = Some(if value == "all" { None } else { Some(value.parse()?) })
            }
            "rho-p" => self.rho_p = Some(parse(key, value)?),
            "rho-d" => self.rho_d = Some(parse(key, value)?),
            "rho-x" => self.rho_x = Some(parse(key, value)?),
            "all-presets" => self.all_presets = Some(parse(key, value)?),
            "accelerate" => self.accelerate = Some(parse(key, value)?),
            "max-iters" => self.max_iters = Some(parse(key, value)?),
            "tol" => self.tol = Some(parse(key, value)?),
            "threads" => self.threads = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "emit-plot-script" => self.emit_plot_script = Some(parse(key, value)?),
            _ => return Err(Error::InvalidConfig(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies this overlay on top of `cfg`.
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.agents {
            cfg.agents = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.r2 {
            cfg.r2 = v;
        }
        if let Some(v) = self.mix {
            cfg.mix = v;
        }
        if let Some(v) = self.rho_p {
            cfg.rho.0 = v;
        }
        if let Some(v) = self.rho_d {
            cfg.rho.1 = v;
        }
        if let Some(v) = self.rho_x {
            cfg.rho.2 = v;
        }
        if let Some(v) = self.all_presets {
            cfg.all_presets = v;
        }
        if let Some(v) = self.accelerate {
            cfg.accelerate = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.emit_plot_script {
            cfg.emit_plot_script = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> PathBuf {
        let path = std::env::temp_dir().join(format!(
            "cpp-config-{}-{:p}.cfg",
            std::process::id(),
            contents.as_ptr()
        ));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn parses_keys_comments_and_blanks() {
        let path = write_temp(
            "# experiment setup\nseed = 7\nmix = all-dual\nrho-d = 0.5   # dual rate\n\ntol = 1e-6\n",
        );
        let overlay = ConfigOverlay::from_file(&path).unwrap();
        let mut cfg = ExperimentConfig::default();
        overlay.apply(&mut cfg);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.mix, Some(Mix::AllDual));
        assert_eq!(cfg.rho.1, 0.5);
        assert_eq!(cfg.tol, 1e-6);
        // Untouched fields keep their defaults.
        assert_eq!(cfg.agents, 30);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn mix_all_clears_selection() {
        let path = write_temp("mix = all\n");
        let overlay = ConfigOverlay::from_file(&path).unwrap();
        let mut cfg = ExperimentConfig { mix: Some(Mix::Thirds), ..ExperimentConfig::default() };
        overlay.apply(&mut cfg);
        assert_eq!(cfg.mix, None);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let path = write_temp("volume = 11\n");
        assert!(ConfigOverlay::from_file(&path).is_err());
        std::fs::remove_file(path).ok();

        let path = write_temp("seed = banana\n");
        assert!(ConfigOverlay::from_file(&path).is_err());
        std::fs::remove_file(path).ok();
    }
}
