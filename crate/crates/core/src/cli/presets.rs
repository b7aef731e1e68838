//! Built-in experiment presets covering the bad-cavity, crossover, spectral,
//! emitter-number, strong-coupling and detuning/dephasing studies.

use crate::cooperativity::{Grid, SweepAxis, SweepOutputs, SweepSpec};
use crate::model::SystemParams;

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub sweeps: Vec<SweepSpec>,
    /// Cap for automatic truncation growth.
    pub max_n_max: Option<usize>,
}

pub const PRESET_NAMES: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

pub fn preset(name: &str) -> Option<Preset> {
    Some(match name {
        "fig2" => fig2(),
        "fig3" => fig3(),
        "fig4" => fig4(),
        "fig5" => fig5(),
        "fig6" => fig6(),
        "fig7" => fig7(),
        _ => return None,
    })
}

fn base(n: usize, g: f64, n_max: usize) -> SystemParams {
    SystemParams::resonant(n, g, 0.0, n_max)
}

fn log(start: f64, stop: f64, points: usize) -> Grid {
    Grid::Log {
        start,
        stop,
        points,
    }
}

fn pump_sweep(name: String, params: SystemParams, grid: Grid, spectrum: bool) -> SweepSpec {
    SweepSpec {
        name,
        base: params,
        axis: SweepAxis::Pump,
        grid,
        outputs: SweepOutputs {
            cooperativity: true,
            spectrum,
        },
    }
}

/// Bad cavity, five emitters, `g = 0.1`: subradiant to superradiant.
pub fn fig2() -> Preset {
    Preset {
        name: "fig2",
        description: "N = 5, g = 0.1: pump sweep with spectra in the bad-cavity regime",
        sweeps: vec![pump_sweep(
            "fig2".into(),
            base(5, 0.1, 12),
            log(1e-3, 10.0, 40),
            true,
        )],
        max_n_max: Some(24),
    }
}

/// Two emitters, coupling family from bad to strong coupling.
pub fn fig3() -> Preset {
    let sweeps = [0.01, 0.1, 1.0, 5.0, 10.0]
        .into_iter()
        .map(|g| {
            pump_sweep(
                format!("fig3_g{g}"),
                base(2, g, 8),
                log(1e-4, 1e3, 57),
                false,
            )
        })
        .collect();
    Preset {
        name: "fig3",
        description: "N = 2, g from 0.01 to 10: superradiance to lasing crossover",
        sweeps,
        max_n_max: Some(512),
    }
}

/// Four emitters, spectra through the lasing window.
pub fn fig4() -> Preset {
    let sweeps = [0.2, 0.5]
        .into_iter()
        .map(|g| {
            pump_sweep(
                format!("fig4_g{g}"),
                base(4, g, 8),
                log(1e-2, 100.0, 33),
                true,
            )
        })
        .collect();
    Preset {
        name: "fig4",
        description: "N = 4, g = 0.2 and 0.5: emission spectra versus pump",
        sweeps,
        max_n_max: Some(64),
    }
}

/// `g = 0.3`, one to five emitters, pump spanning `Γ/100 .. 100Γ`.
pub fn fig5() -> Preset {
    let g = 0.3;
    let gamma = 4.0 * g * g;
    let sweeps = (1..=5)
        .map(|n| {
            pump_sweep(
                format!("fig5_n{n}"),
                base(n, g, 6),
                log(gamma / 100.0, gamma * 100.0, 33),
                false,
            )
        })
        .collect();
    Preset {
        name: "fig5",
        description: "g = 0.3, N = 1..5: emitter-number dependence in the bad-cavity regime",
        sweeps,
        max_n_max: Some(32),
    }
}

/// Strong coupling `g = 5`, one to three emitters.
pub fn fig6() -> Preset {
    let sweeps = (1..=3)
        .map(|n| {
            pump_sweep(
                format!("fig6_n{n}"),
                base(n, 5.0, 8),
                log(1e-2, 1e3, 41),
                false,
            )
        })
        .collect();
    Preset {
        name: "fig6",
        description: "g = 5, N = 1..3: subradiance, lasing and quenching",
        sweeps,
        max_n_max: Some(512),
    }
}

/// Two emitters at `g = 5`: symmetric detuning and pure dephasing.
pub fn fig7() -> Preset {
    let rates = vec![
        0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0, 70.0, 100.0,
    ];
    let mut sweeps = Vec::new();
    for pump in [1.0, 10.0] {
        let mut p = base(2, 5.0, 8);
        p.pump = pump;
        for (axis, tag) in [
            (SweepAxis::DetuningSymmetric, "detuning"),
            (SweepAxis::Dephasing, "dephasing"),
        ] {
            sweeps.push(SweepSpec {
                name: format!("fig7_{tag}_p{pump}"),
                base: p.clone(),
                axis,
                grid: Grid::List {
                    values: rates.clone(),
                },
                outputs: SweepOutputs::default(),
            });
        }
    }
    Preset {
        name: "fig7",
        description: "N = 2, g = 5: cooperativity versus symmetric detuning and dephasing",
        sweeps,
        max_n_max: Some(256),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_expands_to_valid_points() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            assert!(!p.sweeps.is_empty());
            for s in &p.sweeps {
                for v in s.grid.values().unwrap() {
                    s.axis.apply(&s.base, v).unwrap();
                }
            }
        }
        assert!(preset("fig9").is_none());
    }

    #[test]
    fn fig2_matches_its_regime() {
        let p = fig2();
        let s = &p.sweeps[0];
        assert_eq!((s.base.n_emitters, s.base.g), (5, 0.1));
        assert!(s.base.n_max >= 12);
        assert!(s.outputs.spectrum);
    }
}
