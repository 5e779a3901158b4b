//! Run configuration: a TOML file with namespaced sections, every field
//! defaulted except the load program.

use std::path::{Path, PathBuf};

use fatigue_damage::evolution::{EvolutionProblem, LoadProfile, LoadProgram, MeshSpec, Schedule, StopRule};
use fatigue_damage::laws::{CouplingLaw, FatigueLaw, MaterialLaws, MuLaw, ZetaVariant};
use fatigue_damage::mesh::{Rect, Side};
use fatigue_damage::rescaling::{DEFAULT_DELTA, DEFAULT_P};
use fatigue_damage::step::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    pub dirichlet_sides: Vec<Side>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            nx: 8,
            ny: 8,
            domain: Rect::UNIT,
            dirichlet_sides: vec![Side::Left, Side::Right],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LawsConfig {
    pub mu: MuLaw,
    pub f: FatigueLaw,
    pub g: CouplingLaw,
    pub zeta: ZetaVariant,
    /// Keep `f` at its virgin value `f(0)`: no fatigue.
    pub f_frozen: bool,
}

impl Default for LawsConfig {
    fn default() -> Self {
        let l = MaterialLaws::default();
        Self {
            mu: l.mu,
            f: l.f,
            g: l.g,
            zeta: l.zeta,
            f_frozen: l.f_frozen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    #[serde(default = "default_profile")]
    pub profile: LoadProfile,
    pub schedule: Schedule,
    pub t_final: f64,
}

fn default_profile() -> LoadProfile {
    LoadProfile::SkewedX1 { skew: 0.5 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub steps: usize,
    pub eps: f64,
    pub alpha0: f64,
    pub v0: f64,
    pub stop: Option<StopRule>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            eps: 0.1,
            alpha0: 1.0,
            v0: 0.0,
            stop: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    /// Steps per run are `round(k_eps / eps)`, so `k·ε` stays fixed.
    pub k_eps: f64,
    /// Exponent of the displacement norm in the arc length.
    pub p: f64,
    /// Rate threshold below which an increment counts as plateau.
    pub delta: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.2, 0.1, 0.05],
            k_eps: 20.0,
            p: DEFAULT_P,
            delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub eq_residual: f64,
    pub psi_identity: f64,
    pub bounds: f64,
    /// Largest `|R| / (E_0 + work)`; the balance gate is skipped when unset.
    pub balance: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            eq_residual: 1e-6,
            psi_identity: 1e-4,
            bounds: 1e-12,
            balance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write a VTK snapshot every this many steps; 0 writes only the endpoints.
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub laws: LawsConfig,
    pub load: LoadConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

const BUNDLED: [(&str, &str); 4] = [
    ("elastic", include_str!("../configs/elastic.toml")),
    ("fatigue", include_str!("../configs/fatigue.toml")),
    ("balance", include_str!("../configs/balance.toml")),
    ("jump", include_str!("../configs/jump.toml")),
];

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled(name: &str) -> Result<RunConfig, CliError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::Usage(format!("no bundled config named {name:?}; have {:?}", bundled_names())))?;
    RunConfig::parse(text)
}

impl RunConfig {
    /// Parse and validate; errors name the offending key.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let reason = e.into_inner().message().trim().to_string();
            CliError::Config { key, reason }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, reason: String| {
            Err(CliError::Config {
                key: key.into(),
                reason,
            })
        };
        if self.mesh.nx == 0 {
            return bad("mesh.nx", "must be at least 1".into());
        }
        if self.mesh.ny == 0 {
            return bad("mesh.ny", "must be at least 1".into());
        }
        if self.time.steps == 0 {
            return bad("time.steps", "must be at least 1".into());
        }
        if !(self.load.t_final > 0.0 && self.load.t_final.is_finite()) {
            return bad("load.t_final", format!("must be positive, got {}", self.load.t_final));
        }
        if !(self.time.eps > 0.0) {
            return bad("time.eps", format!("must be positive, got {}", self.time.eps));
        }
        if let Some(e) = self.sweep.eps.iter().find(|e| !(**e > 0.0)) {
            return bad("sweep.eps", format!("entries must be positive, got {e}"));
        }
        if !(self.sweep.k_eps > 0.0) {
            return bad("sweep.k_eps", format!("must be positive, got {}", self.sweep.k_eps));
        }
        if !(self.sweep.p >= 2.0) {
            return bad("sweep.p", format!("must be at least 2, got {}", self.sweep.p));
        }
        if let Err(e) = self.laws().validate() {
            return bad("laws", e.to_string());
        }
        if let Err(e) = self.problem().validate() {
            return bad("time", e.to_string());
        }
        Ok(())
    }

    pub fn laws(&self) -> MaterialLaws {
        let l = &self.laws;
        MaterialLaws {
            mu: l.mu,
            f: l.f,
            g: l.g,
            zeta: l.zeta,
            f_frozen: l.f_frozen,
        }
    }

    pub fn problem(&self) -> EvolutionProblem {
        EvolutionProblem {
            mesh: MeshSpec {
                nx: self.mesh.nx,
                ny: self.mesh.ny,
                domain: self.mesh.domain,
                dirichlet_sides: self.mesh.dirichlet_sides.clone(),
            },
            laws: self.laws(),
            load: LoadProgram {
                profile: self.load.profile,
                schedule: self.load.schedule,
                t_final: self.load.t_final,
            },
            steps: self.time.steps,
            eps: self.time.eps,
            alpha0: self.time.alpha0,
            v0: self.time.v0,
            solver: self.solver,
            stop: self.time.stop,
        }
    }

    /// The problem for one sweep entry.
    pub fn sweep_problem(&self, eps: f64) -> EvolutionProblem {
        let mut p = self.problem();
        p.eps = eps;
        p.steps = ((self.sweep.k_eps / eps).round() as usize).max(1);
        p
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[load]\nschedule = { kind = \"ramp\", rate = 1.0 }\nt_final = 1.0\n";

    #[test]
    fn defaults_fill_a_minimal_file() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.mesh, MeshConfig::default());
        assert_eq!(c.time.steps, 100);
    }

    #[test]
    fn errors_name_the_key() {
        let text = format!("{MINIMAL}[mesh]\nnx = -3\n");
        let Err(CliError::Config { key, .. }) = RunConfig::parse(&text) else {
            panic!()
        };
        assert_eq!(key, "mesh.nx");
        let text = format!("{MINIMAL}[time]\nsteps = 0\n");
        let Err(CliError::Config { key, .. }) = RunConfig::parse(&text) else {
            panic!()
        };
        assert_eq!(key, "time.steps");
        let text = format!("{MINIMAL}[solver]\ntol_pgg = 1.0\n");
        let Err(CliError::Config { key, reason }) = RunConfig::parse(&text) else {
            panic!()
        };
        assert!(key.starts_with("solver"), "{key}");
        assert!(reason.contains("tol_pgg"), "{reason}");
    }

    #[test]
    fn manifest_round_trips() {
        for name in bundled_names() {
            let c = bundled(name).unwrap();
            assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c, "{name}");
        }
    }
}
