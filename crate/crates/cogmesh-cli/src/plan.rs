//! Config ingestion: TOML simulation configs, experiment grids, and
//! attention-parameter files, all merged over the built-in defaults.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cogmesh::{GlobalParams, MobilityClass, RunMode, SimConfig};
use serde::{Deserialize, Serialize};

/// A recorded (config, seed) bundle, written next to every run's CSV so
/// the exact experiment can be replayed later.
#[derive(Serialize, Deserialize)]
pub struct Bundle {
    pub seed: u64,
    pub runs: u64,
    pub config: SimConfig,
}

impl Bundle {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read experiment bundle {}", path.display()))?;
        let bundle: Bundle = toml::from_str(&text)
            .with_context(|| format!("malformed experiment bundle {}", path.display()))?;
        bundle.config.validate().context("bundle holds an invalid config")?;
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).expect("bundle serializes");
        fs::write(path, text)
            .with_context(|| format!("cannot write experiment bundle {}", path.display()))?;
        Ok(())
    }
}

/// Load a simulation config; absent keys fall back to the defaults.
pub fn load_config(path: Option<&Path>) -> Result<SimConfig> {
    let config = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            toml::from_str::<SimConfig>(&text)
                .with_context(|| format!("malformed config {}", p.display()))?
        }
        None => SimConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

/// Resolve an `--attention` argument: the two built-in configurations
/// by name, or a TOML file holding the five parameters.
pub fn apply_attention(config: &mut SimConfig, spec: &str) -> Result<()> {
    let (params, id) = match spec {
        "C1" | "c1" => (GlobalParams::c1(), "C1".to_owned()),
        "C2" | "c2" => (GlobalParams::c2(), "C2".to_owned()),
        path => {
            let p = Path::new(path);
            let text = fs::read_to_string(p).with_context(|| {
                format!("--attention {path}: not a built-in name and not a readable file")
            })?;
            let params: GlobalParams = toml::from_str(&text)
                .with_context(|| format!("malformed attention parameters in {path}"))?;
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".to_owned());
            (params, id)
        }
    };
    if let Err(reason) = params.validate() {
        bail!("attention configuration {id} is invalid: {reason}");
    }
    config.params = params;
    config.config_id = id;
    Ok(())
}

/// A named grid over the experiment axes. Every cell must expand to a
/// valid simulation config; expansion order is fixed so output files
/// are reproducible.
#[derive(Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub name: String,
    pub grid: GridAxes,
    /// Settings shared by every cell before the axes are applied.
    pub base: SimConfig,
}

#[derive(Deserialize)]
#[serde(default)]
pub struct GridAxes {
    pub mobility: Vec<MobilityClass>,
    pub density: Vec<u32>,
    pub composition_length: Vec<u32>,
    pub attention: Vec<String>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            name: "full-grid".to_owned(),
            grid: GridAxes::default(),
            base: SimConfig::default(),
        }
    }
}

impl Default for GridAxes {
    fn default() -> Self {
        Self {
            mobility: vec![MobilityClass::Slow, MobilityClass::Medium, MobilityClass::Fast],
            density: vec![20, 40, 60],
            composition_length: vec![5, 10],
            attention: vec!["C1".to_owned()],
        }
    }
}

impl ExperimentPlan {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("cannot read experiment plan {}", p.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("malformed experiment plan {}", p.display()))
            }
            None => Ok(Self::default()),
        }
    }

    /// Expand the grid in attention → length → mobility → density order.
    pub fn cells(&self, mode: Option<RunMode>) -> Result<Vec<SimConfig>> {
        let mut cells = Vec::new();
        for attention in &self.grid.attention {
            for &cl in &self.grid.composition_length {
                for &mobility in &self.grid.mobility {
                    for &density in &self.grid.density {
                        let mut cfg = self.base.clone();
                        cfg.composition_length = cl;
                        cfg.mobility = mobility;
                        cfg.service_density = density;
                        if let Some(m) = mode {
                            cfg.mode = m;
                        }
                        apply_attention(&mut cfg, attention)?;
                        cfg.validate().with_context(|| {
                            format!(
                                "grid cell (attention {attention}, length {cl}, \
                                 {} mobility, density {density}) is invalid",
                                mobility.label()
                            )
                        })?;
                        cells.push(cfg);
                    }
                }
            }
        }
        Ok(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_expands_to_the_full_grid() {
        let plan = ExperimentPlan::default();
        let cells = plan.cells(None).unwrap();
        assert_eq!(cells.len(), 18);
        assert!(cells.iter().all(|c| c.config_id == "C1"));
        // Density varies fastest, attention slowest.
        assert_eq!(cells[0].service_density, 20);
        assert_eq!(cells[1].service_density, 40);
        assert_eq!(cells[0].composition_length, cells[8].composition_length);
        assert_ne!(cells[0].composition_length, cells[9].composition_length);
    }

    #[test]
    fn partial_config_files_inherit_defaults() {
        let cfg: SimConfig = toml::from_str("service_density = 60\nmobility = \"fast\"").unwrap();
        assert_eq!(cfg.service_density, 60);
        assert_eq!(cfg.mobility, MobilityClass::Fast);
        assert_eq!(cfg.composition_length, SimConfig::default().composition_length);
    }

    #[test]
    fn attention_accepts_names_and_rejects_junk() {
        let mut cfg = SimConfig::default();
        apply_attention(&mut cfg, "C2").unwrap();
        assert_eq!(cfg.config_id, "C2");
        assert!(apply_attention(&mut cfg, "no-such-file.toml").is_err());
    }
}
