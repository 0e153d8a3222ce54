use std::str::FromStr;

use crate::medium::{JerlovType, Sky};
use crate::polarization::Bb84State;

use super::config::{ExperimentConfig, SweepKey};
use super::output::ResultTable;
use super::runner::{Runner, Series};
use super::{default_workers, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Received photons against distance for the three water types.
    Fig3,
    /// Received photons against aperture at 60 and 100 m, FOV 175 mrad.
    Fig4a,
    /// Received photons against FOV at 60 and 100 m, aperture 20 cm.
    Fig4b,
    /// Fidelity against aperture (FOV 175 mrad) and FOV (aperture 20 cm) at 60 m.
    Fig5,
    /// Fidelity against distance.
    Fig6,
    /// QBER against aperture at 60 m for each ambient condition.
    Fig7a,
    /// QBER against FOV at 60 m, aperture 20 cm, for each ambient condition.
    Fig7b,
    /// QBER against distance for each ambient condition.
    Fig8,
    /// QBER against receiver depth for a 100 m link.
    Fig9,
    /// Sifted key rate against distance under starlight.
    Fig10,
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::Fig3,
        Preset::Fig4a,
        Preset::Fig4b,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig7a,
        Preset::Fig7b,
        Preset::Fig8,
        Preset::Fig9,
        Preset::Fig10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7a => "fig7a",
            Preset::Fig7b => "fig7b",
            Preset::Fig8 => "fig8",
            Preset::Fig9 => "fig9",
            Preset::Fig10 => "fig10",
        }
    }

    /// Series evaluated by this preset. Physical and numerical settings not
    /// fixed by the preset (photons, seed, PSD, link parameters) come from `base`.
    pub fn series(self, base: &ExperimentConfig) -> Vec<Series> {
        let mut b = base.clone();
        b.sweep = None;
        b.water = JerlovType::I;
        b.extinction = None;
        b.aperture = 0.1;
        b.fov = 0.175;
        b.depth = 200.0;
        b.environment = Some(Sky::Starlight);
        b.states = Bb84State::ALL.to_vec();

        let distances = steps(10.0, 10.0, 10);
        let long_distances = steps(10.0, 10.0, 15);
        let apertures = steps(0.05, 0.05, 10);
        let fovs = steps(0.05, 0.05, 10);
        let skies: [(&str, Option<Sky>); 4] = [
            ("no-background", None),
            ("full-moon", Some(Sky::FullMoon)),
            ("starlight", Some(Sky::Starlight)),
            ("cloudy-night", Some(Sky::CloudyNight)),
        ];
        let with = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = b.clone();
            f(&mut c);
            c
        };

        match self {
            Preset::Fig3 => JerlovType::ALL
                .iter()
                .map(|&w| {
                    let c = with(&|c| {
                        c.water = w;
                        c.states = vec![Bb84State::H];
                    });
                    Series::new(format!("jerlov-{}", w.label()), c.with_sweep(SweepKey::Distance, distances.clone()))
                })
                .collect(),
            Preset::Fig4a | Preset::Fig4b => [60.0, 100.0]
                .iter()
                .map(|&l| {
                    let c = with(&|c| {
                        c.distance = l;
                        c.states = vec![Bb84State::H];
                        if self == Preset::Fig4b {
                            c.aperture = 0.2;
                        }
                    });
                    let c = if self == Preset::Fig4a {
                        c.with_sweep(SweepKey::Aperture, apertures.clone())
                    } else {
                        c.with_sweep(SweepKey::Fov, fovs.clone())
                    };
                    Series::new(format!("L={l}m"), c)
                })
                .collect(),
            Preset::Fig5 => vec![
                Series::new(
                    "aperture",
                    with(&|c| c.distance = 60.0).with_sweep(SweepKey::Aperture, apertures.clone()),
                ),
                Series::new(
                    "fov",
                    with(&|c| {
                        c.distance = 60.0;
                        c.aperture = 0.2;
                    })
                    .with_sweep(SweepKey::Fov, fovs.clone()),
                ),
            ],
            Preset::Fig6 => vec![Series::new("jerlov-I", b.clone().with_sweep(SweepKey::Distance, distances))],
            Preset::Fig7a | Preset::Fig7b => skies
                .iter()
                .map(|&(label, sky)| {
                    let c = with(&|c| {
                        c.distance = 60.0;
                        c.environment = sky;
                        if self == Preset::Fig7b {
                            c.aperture = 0.2;
                        }
                    });
                    let c = if self == Preset::Fig7a {
                        c.with_sweep(SweepKey::Aperture, apertures.clone())
                    } else {
                        c.with_sweep(SweepKey::Fov, fovs.clone())
                    };
                    Series::new(label, c)
                })
                .collect(),
            Preset::Fig8 => skies
                .iter()
                .map(|&(label, sky)| {
                    Series::new(
                        label,
                        with(&|c| c.environment = sky).with_sweep(SweepKey::Distance, long_distances.clone()),
                    )
                })
                .collect(),
            Preset::Fig9 => [("cloudy-night", Sky::CloudyNight), ("starlight", Sky::Starlight)]
                .iter()
                .map(|&(label, sky)| {
                    let c = with(&|c| {
                        c.distance = 100.0;
                        c.environment = Some(sky);
                    });
                    Series::new(label, c.with_sweep(SweepKey::Depth, steps(100.0, 25.0, 17)))
                })
                .collect(),
            Preset::Fig10 => vec![Series::new("starlight", b.clone().with_sweep(SweepKey::Distance, long_distances))],
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s)).ok_or_else(|| {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            format!("unknown preset `{s}` (expected one of {})", names.join(", "))
        })
    }
}

fn steps(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

/// Evaluates a preset and writes its CSV to `base.output` when set.
pub fn run_preset(preset: Preset, base: &ExperimentConfig) -> Result<ResultTable, HarnessError> {
    let mut runner = Runner::new(base.workers.unwrap_or_else(default_workers));
    let table = runner.run(preset.name(), &preset.series(base))?;
    if let Some(path) = &base.output {
        table.write(path)?;
    }
    Ok(table)
}
