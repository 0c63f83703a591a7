//! Run configuration: a strict TOML file merged with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hdgz_core::materials::{preset, Lame, Material};

/// Inline coefficient block, used instead of a named preset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub rho: f64,
    pub chi: f64,
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub mu_c: f64,
    pub lambda_c: f64,
    #[serde(default)]
    pub mu_d: f64,
    #[serde(default)]
    pub lambda_d: f64,
}

impl Parameters {
    pub fn material(&self) -> Material {
        Material {
            rho: self.rho,
            chi: self.chi,
            s: self.s,
            alpha: self.alpha,
            beta: self.beta,
            omega: self.omega,
            c: Lame { mu: self.mu_c, lambda: self.lambda_c },
            d: Lame { mu: self.mu_d, lambda: self.lambda_d },
        }
    }
}

/// Every key is optional in the file; flags fill or override them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub preset: Option<String>,
    pub parameters: Option<Parameters>,
    /// Convergence study kind: "h", "k" or "dt".
    pub study: Option<String>,
    pub k: Option<Vec<usize>>,
    pub meshes: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub dts: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub final_time: Option<f64>,
    pub scenario: Option<String>,
    pub out: Option<PathBuf>,
    pub quad_boost: Option<usize>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Values set in `flags` win over values in `self`.
    pub fn merged(self, flags: RunConfig) -> Self {
        Self {
            command: flags.command.or(self.command),
            preset: flags.preset.or(self.preset),
            parameters: flags.parameters.or(self.parameters),
            study: flags.study.or(self.study),
            k: flags.k.or(self.k),
            meshes: flags.meshes.or(self.meshes),
            n: flags.n.or(self.n),
            dt: flags.dt.or(self.dt),
            dts: flags.dts.or(self.dts),
            final_time: flags.final_time.or(self.final_time),
            scenario: flags.scenario.or(self.scenario),
            out: flags.out.or(self.out),
            quad_boost: flags.quad_boost.or(self.quad_boost),
            threads: flags.threads.or(self.threads),
        }
    }

    /// Checks value ranges; the command name must match the file's, if set.
    pub fn validate(&self, command: &str) -> Result<()> {
        if let Some(c) = &self.command {
            if c != command {
                bail!("config key `command` is \"{c}\" but the subcommand is \"{command}\"");
            }
        }
        if self.preset.is_some() && self.parameters.is_some() {
            bail!("config keys `preset` and `parameters` are mutually exclusive");
        }
        self.material()?;
        let positive = |key: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !(x.is_finite() && x > 0.0) => bail!("config key `{key}` must be finite and positive, got {x}"),
                _ => Ok(()),
            }
        };
        positive("dt", self.dt)?;
        positive("T", self.final_time)?;
        for &d in self.dts.iter().flatten() {
            positive("dts", Some(d))?;
        }
        if self.meshes.iter().flatten().any(|&n| n == 0) || self.n == Some(0) {
            bail!("mesh subdivisions must be at least 1");
        }
        if self.threads == Some(0) {
            bail!("config key `threads` must be at least 1");
        }
        if matches!(&self.k, Some(k) if k.is_empty()) {
            bail!("config key `k` is empty");
        }
        if let Some(s) = &self.study {
            if !["h", "k", "dt"].contains(&s.as_str()) {
                bail!("config key `study` must be one of h, k, dt; got \"{s}\"");
            }
        }
        Ok(())
    }

    pub fn preset_name(&self) -> String {
        if self.parameters.is_some() {
            "custom".into()
        } else {
            self.preset.clone().unwrap_or_else(|| "l1".into())
        }
    }

    pub fn material(&self) -> Result<Material> {
        let m = match &self.parameters {
            Some(p) => p.material(),
            None => preset(&self.preset_name()).with_context(|| "config key `preset`")?,
        };
        m.validate().with_context(|| "config key `parameters`")?;
        Ok(m)
    }

    /// Output directory: flag or file value, else `$HDGZ_OUT/<command>`,
    /// else `runs/<command>`.
    pub fn out_dir(&self, command: &str) -> PathBuf {
        if let Some(o) = &self.out {
            return o.clone();
        }
        match std::env::var_os("HDGZ_OUT") {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(command),
            _ => PathBuf::from("runs").join(command),
        }
    }

    /// SHA-256 of the effective configuration, keys in declaration order.
    pub fn hash(&self, command: &str) -> String {
        let mut c = self.clone();
        c.command = Some(command.into());
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_study_file() {
        let c = RunConfig::from_toml("command = \"convergence\"\npreset = \"l1\"\nk = [1]\nmeshes = [4, 8, 16, 32]\n").unwrap();
        assert_eq!(c.meshes, Some(vec![4, 8, 16, 32]));
        c.validate("convergence").unwrap();
        assert!(c.validate("scenario").is_err());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml("[parameters]\nomegaa = 1.0\n").unwrap_err();
        assert!(format!("{err:#}").contains("omegaa"));
        let err = RunConfig::from_toml("dtt = 0.1\n").unwrap_err();
        assert!(format!("{err:#}").contains("dtt"));
    }

    #[test]
    fn type_mismatch_is_rejected() {
        let err = RunConfig::from_toml("k = \"one\"\n").unwrap_err();
        assert!(format!("{err:#}").contains('k'));
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig::from_toml("dt = 0.1\nT = 1.0\n").unwrap();
        let flags = RunConfig { dt: Some(0.01), ..Default::default() };
        let c = file.merged(flags);
        assert_eq!(c.dt, Some(0.01));
        assert_eq!(c.final_time, Some(1.0));
    }

    #[test]
    fn inline_parameters() {
        let text = "[parameters]\nrho = 1.0\nchi = 1.0\ns = 1.0\nalpha = 1.0\nbeta = 1.0\nomega = 0.0\nmu_c = 2.0\nlambda_c = 3.0\n";
        let c = RunConfig::from_toml(text).unwrap();
        c.validate("convergence").unwrap();
        assert_eq!(c.preset_name(), "custom");
        assert_eq!(c.material().unwrap().c.lambda, 3.0);
        let bad = RunConfig { preset: Some("l9".into()), ..Default::default() };
        assert!(bad.validate("convergence").is_err());
    }

    #[test]
    fn range_checks() {
        for c in [
            RunConfig { dt: Some(-1.0), ..Default::default() },
            RunConfig { final_time: Some(f64::NAN), ..Default::default() },
            RunConfig { meshes: Some(vec![4, 0]), ..Default::default() },
            RunConfig { threads: Some(0), ..Default::default() },
            RunConfig { study: Some("x".into()), ..Default::default() },
        ] {
            assert!(c.validate("convergence").is_err());
        }
    }

    #[test]
    fn hash_depends_on_content() {
        let a = RunConfig { dt: Some(0.1), ..Default::default() };
        let b = RunConfig { dt: Some(0.2), ..Default::default() };
        assert_eq!(a.hash("probe"), a.clone().hash("probe"));
        assert_ne!(a.hash("probe"), b.hash("probe"));
        assert_eq!(a.hash("probe").len(), 64);
    }
}
