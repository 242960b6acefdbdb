//! Simulation grids from TOML.
//!
//! A config file is a flat table whose keys map onto [`ExperimentGrid`]:
//!
//! ```toml
//! n1 = 5
//! n2 = 5
//! p = 500
//! structure = "srd"       # "ind", "srd" (needs rho) or "lrd" (needs hurst)
//! rho = 0.3
//! betas = [0.0, 0.1, 0.2]
//! theta = 0.5
//! replicates = 2000
//! methods = ["dlrt", "unscaled"]
//! ```
//!
//! Unknown keys are errors, reported all at once.

use std::path::Path;

use hdmt_core::datagen::{Correlation, CovarianceSpec, VarianceLaw};
use hdmt_core::dlrt::{Centering, DEFAULT_EXPANSION_K, DEFAULT_LAG_H};
use hdmt_core::simharness::{Design, ExperimentGrid, Method, Tail};
use serde::Deserialize;

use crate::error::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "design",
    "n1",
    "n2",
    "p",
    "variance_law",
    "variance_lo",
    "variance_hi",
    "structure",
    "rho",
    "hurst",
    "betas",
    "theta",
    "tail",
    "replicates",
    "alpha",
    "lag_h",
    "centering",
    "k",
    "methods",
    "n_perms",
    "lambda",
    "master_seed",
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    design: Option<Design>,
    n1: usize,
    n2: Option<usize>,
    p: usize,
    variance_law: Option<String>,
    variance_lo: Option<f64>,
    variance_hi: Option<f64>,
    structure: String,
    rho: Option<f64>,
    hurst: Option<f64>,
    betas: Option<Vec<f64>>,
    theta: Option<f64>,
    tail: Option<Tail>,
    replicates: Option<usize>,
    alpha: Option<f64>,
    lag_h: Option<usize>,
    centering: Option<String>,
    k: Option<u32>,
    methods: Option<Vec<String>>,
    n_perms: Option<usize>,
    lambda: Option<f64>,
    master_seed: Option<u64>,
}

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut bad: Vec<String> = table
        .keys()
        .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
        .cloned()
        .collect();
    bad.sort();
    bad
}

pub fn load_grid(path: &Path) -> Result<ExperimentGrid, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    parse_grid(&text)
}

pub fn parse_grid(text: &str) -> Result<ExperimentGrid, CliError> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| CliError::input(format!("invalid config: {e}")))?;
    let bad = unknown_keys(&table);
    if !bad.is_empty() {
        return Err(CliError::input(format!(
            "unknown config keys: {} (known keys: {})",
            bad.join(", "),
            KNOWN_KEYS.join(", ")
        )));
    }
    let raw: RawGrid = toml::from_str(text).map_err(|e| CliError::input(format!("invalid config: {e}")))?;
    build(raw)
}

fn build(raw: RawGrid) -> Result<ExperimentGrid, CliError> {
    let correlation = match raw.structure.as_str() {
        "ind" => Correlation::Ind,
        "srd" | "ar1" => Correlation::Ar1 {
            rho: raw
                .rho
                .ok_or_else(|| CliError::input("structure \"srd\" needs rho"))?,
        },
        "lrd" => Correlation::Lrd {
            hurst: raw
                .hurst
                .ok_or_else(|| CliError::input("structure \"lrd\" needs hurst"))?,
        },
        other => {
            return Err(CliError::input(format!(
                "unknown structure {other:?}; expected \"ind\", \"srd\" or \"lrd\""
            )))
        }
    };
    if raw.rho.is_some() && !matches!(correlation, Correlation::Ar1 { .. }) {
        return Err(CliError::input("rho only applies to structure = \"srd\""));
    }
    if raw.hurst.is_some() && !matches!(correlation, Correlation::Lrd { .. }) {
        return Err(CliError::input("hurst only applies to structure = \"lrd\""));
    }

    let law = raw.variance_law.as_deref().unwrap_or("chisq5_scaled");
    let variance_law = match law {
        "chisq5_scaled" => VarianceLaw::Chisq5Scaled,
        "unit" => VarianceLaw::Unit,
        "equispaced" => VarianceLaw::Equispaced {
            lo: raw.variance_lo.unwrap_or(0.01),
            hi: raw.variance_hi.unwrap_or(150.0),
        },
        other => {
            return Err(CliError::input(format!(
                "unknown variance_law {other:?}; expected \"chisq5_scaled\", \"unit\" or \"equispaced\""
            )))
        }
    };
    if law != "equispaced" && (raw.variance_lo.is_some() || raw.variance_hi.is_some()) {
        return Err(CliError::input(
            "variance_lo / variance_hi only apply to variance_law = \"equispaced\"",
        ));
    }

    let centering = match raw.centering.as_deref().unwrap_or("exact") {
        "exact" => {
            if raw.k.is_some() {
                return Err(CliError::input("k only applies to centering = \"expansion\""));
            }
            Centering::ExactM1
        }
        "expansion" => Centering::Expansion {
            k: raw.k.unwrap_or(DEFAULT_EXPANSION_K),
        },
        other => {
            return Err(CliError::input(format!(
                "unknown centering {other:?}; expected \"exact\" or \"expansion\""
            )))
        }
    };

    let methods = match raw.methods {
        None => vec![Method::Dlrt],
        Some(names) => {
            let mut methods = Vec::with_capacity(names.len());
            let mut bad = Vec::new();
            for name in &names {
                match Method::parse(name) {
                    Some(m) if !methods.contains(&m) => methods.push(m),
                    Some(_) => {}
                    None => bad.push(name.as_str()),
                }
            }
            if !bad.is_empty() {
                return Err(CliError::input(format!(
                    "unknown methods: {} (expected dlrt, diag_hotelling, unscaled, regularized)",
                    bad.join(", ")
                )));
            }
            methods
        }
    };

    let design = raw.design.unwrap_or(Design::TwoSample);
    let n2 = match (design, raw.n2) {
        (Design::TwoSample, Some(n2)) => n2,
        (Design::TwoSample, None) => return Err(CliError::input("two_sample design needs n2")),
        (Design::OneSample, Some(_)) => {
            return Err(CliError::input("n2 does not apply to the one_sample design"))
        }
        (Design::OneSample, None) => 0,
    };

    let mut grid = ExperimentGrid::new(raw.n1, n2, CovarianceSpec::new(raw.p, variance_law, correlation));
    grid.design = design;
    grid.betas = raw.betas.unwrap_or_else(|| vec![0.0]);
    grid.theta = raw.theta.unwrap_or(0.0);
    grid.tail = raw.tail.unwrap_or(Tail::Normal);
    grid.replicates = raw.replicates.unwrap_or(grid.replicates);
    grid.alpha = raw.alpha.unwrap_or(grid.alpha);
    grid.lag_h = raw.lag_h.unwrap_or(DEFAULT_LAG_H);
    grid.centering = centering;
    grid.methods = methods;
    grid.n_perms = raw.n_perms.unwrap_or(grid.n_perms);
    grid.lambda = raw.lambda;
    grid.master_seed = raw.master_seed.unwrap_or(0);
    grid.validate()?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let g = parse_grid("n1 = 5\nn2 = 5\np = 100\nstructure = \"ind\"\n").unwrap();
        assert_eq!((g.n1, g.n2, g.p()), (5, 5, 100));
        assert_eq!(g.betas, vec![0.0]);
        assert_eq!(g.replicates, 2000);
        assert_eq!(g.methods, vec![Method::Dlrt]);
        assert_eq!(g.structure.variance_law, VarianceLaw::Chisq5Scaled);
        assert_eq!(g.master_seed, 0);
    }

    #[test]
    fn full_config() {
        let g = parse_grid(
            r#"
            design = "two_sample"
            n1 = 15
            n2 = 15
            p = 500
            variance_law = "equispaced"
            variance_lo = 0.01
            variance_hi = 150.0
            structure = "lrd"
            hurst = 0.625
            betas = [0.0, 0.25]
            theta = 0.25
            tail = "double_pareto"
            replicates = 10
            alpha = 0.1
            lag_h = 3
            centering = "expansion"
            k = 2
            methods = ["dlrt", "cq", "rht", "diag-hotelling"]
            n_perms = 99
            lambda = 2.0
            master_seed = 42
            "#,
        )
        .unwrap();
        assert_eq!(g.structure.correlation, Correlation::Lrd { hurst: 0.625 });
        assert_eq!(g.tail, Tail::DoublePareto);
        assert_eq!(g.centering, Centering::Expansion { k: 2 });
        assert_eq!(
            g.methods,
            vec![Method::Dlrt, Method::Unscaled, Method::Regularized, Method::DiagHotelling]
        );
        assert_eq!(g.lambda, Some(2.0));
        assert_eq!(g.master_seed, 42);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = parse_grid("n1 = 5\nn2 = 5\np = 100\nstructure = \"ind\"\nreps = 3\nsigma = 1\n")
            .unwrap_err();
        let msg = err.to_string();
        assert_eq!(err.exit_code(), 2);
        assert!(msg.contains("reps") && msg.contains("sigma"), "{msg}");
    }

    #[test]
    fn inconsistent_configs_are_rejected() {
        let base = "n1 = 5\nn2 = 5\np = 100\n";
        for extra in [
            "structure = \"srd\"\n",
            "structure = \"ind\"\nrho = 0.3\n",
            "structure = \"ind\"\nmethods = [\"dlrt\", \"magic\"]\n",
            "structure = \"ind\"\nalpha = 1.5\n",
            "structure = \"ind\"\nk = 2\n",
            "structure = \"ind\"\nreplicates = \"many\"\n",
            "structure = \"weird\"\n",
        ] {
            let text = format!("{base}{extra}");
            assert!(parse_grid(&text).is_err(), "{text}");
        }
        assert!(parse_grid("n1 = 5\np = 100\nstructure = \"ind\"\n").is_err());
        let one = parse_grid("design = \"one_sample\"\nn1 = 5\np = 100\nstructure = \"ind\"\n").unwrap();
        assert_eq!(one.design, Design::OneSample);
    }
}
