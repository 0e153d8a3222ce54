use std::collections::HashMap;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::link::{background_at_depth, ChannelRates, LinkBudget};
use crate::medium::{calibrate, Environment, WaterOptics, WaterType};
use crate::mie::MieTableSet;
use crate::polarization::{fidelity_with_error, Bb84State};
use crate::transport::{run_transport, ReceiverGeometry, ScatteringMedium, TransportError, TransportTallies};

use super::config::{ExperimentConfig, SweepKey};
use super::output::{ResultRow, ResultTable};
use super::{default_workers, HarnessError};

/// A labelled sweep. Configurations without a sweep yield a single row.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub config: ExperimentConfig,
}

impl Series {
    pub fn new(label: impl Into<String>, config: ExperimentConfig) -> Self {
        Self { label: label.into(), config }
    }

    fn points(&self) -> Vec<(f64, ExperimentConfig)> {
        match &self.config.sweep {
            Some(sw) => sw.values.iter().map(|&v| (v, self.config.at(sw.key, v))).collect(),
            None => vec![(self.config.distance, self.config.clone())],
        }
    }
}

fn bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

type TableKey = Vec<u64>;

/// Evaluates sweep points, reusing Mie tables and transport runs across
/// points that share them (e.g. environment or depth sweeps).
pub struct Runner {
    workers: usize,
    tables: HashMap<TableKey, Arc<MieTableSet>>,
    optics: HashMap<TableKey, WaterOptics>,
    transport: HashMap<(Vec<u64>, Bb84State), TransportTallies>,
}

impl Runner {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1), tables: HashMap::new(), optics: HashMap::new(), transport: HashMap::new() }
    }

    pub fn medium(&mut self, cfg: &ExperimentConfig) -> Result<ScatteringMedium, HarnessError> {
        let mut key = bits(&[
            cfg.psd.slope(),
            cfg.psd.dmin(),
            cfg.psd.dmax(),
            cfg.particle_index.real(),
            cfg.particle_index.absorption(),
            cfg.wavelength,
            cfg.water_index,
        ]);
        let water = WaterType { name: cfg.water, mu_e: cfg.extinction(), mu_a_water: cfg.water_absorption };
        let mut water_key = key.clone();
        water_key.extend(bits(&[water.mu_e, water.mu_a_water]));
        let optics = match self.optics.get(&water_key) {
            Some(o) => *o,
            None => {
                let o = calibrate(water, cfg.psd, cfg.particle_index, cfg.wavelength, cfg.water_index)?;
                self.optics.insert(water_key, o);
                o
            }
        };
        key.push(cfg.diameter_nodes as u64);
        let tables = match self.tables.get(&key) {
            Some(t) => t.clone(),
            None => {
                let t = Arc::new(MieTableSet::build(
                    &cfg.psd,
                    cfg.wavelength,
                    cfg.particle_index,
                    cfg.water_index,
                    cfg.diameter_nodes,
                )
                .map_err(TransportError::from)?);
                self.tables.insert(key, t.clone());
                t
            }
        };
        Ok(ScatteringMedium::new(optics, tables))
    }

    /// Transport tallies for one prepared state at the geometry of `cfg`.
    pub fn tallies(&mut self, cfg: &ExperimentConfig, state: Bb84State) -> Result<TransportTallies, HarnessError> {
        let medium = self.medium(cfg)?;
        let o = &medium.optics;
        let mut key = bits(&[o.mu_m, o.mu_s_p, o.mu_a_p, o.mu_e, cfg.distance, cfg.aperture, cfg.fov]);
        key.extend(bits(&[cfg.psd.slope(), cfg.psd.dmin(), cfg.psd.dmax(), cfg.wavelength, cfg.water_index]));
        key.extend(bits(&[cfg.particle_index.real(), cfg.particle_index.absorption()]));
        key.extend([cfg.diameter_nodes as u64, cfg.photons, cfg.seed]);
        let key = (key, state);
        if let Some(t) = self.transport.get(&key) {
            return Ok(t.clone());
        }
        let recv = ReceiverGeometry::new(cfg.distance, cfg.aperture, cfg.fov)?;
        let t = run_transport(state, &medium, &recv, cfg.photons, cfg.seed, self.workers)?;
        self.transport.insert(key, t.clone());
        Ok(t)
    }

    /// One result row for a configuration without a sweep.
    pub fn evaluate(&mut self, label: &str, sweep_value: f64, cfg: &ExperimentConfig) -> Result<ResultRow, HarnessError> {
        let mut runs = Vec::with_capacity(cfg.states.len());
        for &state in &cfg.states {
            runs.push((state, self.tallies(cfg, state)?));
        }
        let rates = ChannelRates::pooled(runs.iter().map(|(s, t)| (*s, t)), &cfg.link)?;
        let env = cfg.environment.map(|sky| Environment { mu_d: cfg.mu_d, ..Environment::new(sky) });
        let bg = background_at_depth(env.as_ref(), cfg.depth, cfg.aperture, cfg.fov, &cfg.link);
        let budget = rates.budget(bg, &cfg.link).ok();

        let launched: u64 = runs.iter().map(|(_, t)| t.launched).sum();
        let received: u64 = runs.iter().map(|(_, t)| t.received()).sum();
        let n = launched as f64;
        let f = cfg.link.source_rate();
        let p = received as f64 / n;
        let signal_rate_se = f * (p * (1.0 - p) / n).sqrt();
        // Per-photon wrong-bit probabilities lie in [0, 1], so their sum bounds their sum of squares.
        let wrong_sum = rates.scatter_error * n / f;
        let scatter_error_se = f * wrong_sum.sqrt() / n;
        let (qber_se, kappa_se) = match &budget {
            Some(b) => {
                let (q_se, k_se) = propagate(b, signal_rate_se, scatter_error_se);
                (Some(q_se), Some(k_se))
            }
            None => (None, None),
        };

        let mut fidelity = [None; 4];
        let mut fidelity_se = [None; 4];
        for (state, t) in &runs {
            let i = Bb84State::ALL.iter().position(|s| s == state).expect("state listed in ALL");
            if let Ok((fi, se)) = fidelity_with_error(*state, &t.scattered) {
                fidelity[i] = Some(fi);
                fidelity_se[i] = Some(se);
            }
        }

        Ok(ResultRow {
            series: label.to_string(),
            sweep_value,
            received_ballistic: runs.iter().map(|(_, t)| t.received_ballistic).sum(),
            received_scattered: runs.iter().map(|(_, t)| t.received_scattered).sum(),
            fidelity,
            signal_rate: rates.signal_rate,
            scatter_error: rates.scatter_error,
            background_error: bg,
            qber: budget.map(|b| b.qber),
            verdict: budget.map(|b| b.verdict),
            kappa: budget.map(|b| b.kappa),
            signal_rate_se,
            fidelity_se,
            qber_se,
            kappa_se,
        })
    }

    /// Evaluates every point of every series, in order.
    pub fn run(&mut self, name: &str, series: &[Series]) -> Result<ResultTable, HarnessError> {
        for s in series {
            s.config.validate()?;
        }
        let mut rows = Vec::new();
        for s in series {
            for (value, cfg) in s.points() {
                rows.push(self.evaluate(&s.label, value, &cfg)?);
            }
        }
        Ok(ResultTable { provenance: provenance(name, series), rows })
    }
}

/// Delta-method standard errors of QBER and kappa from those of `N` and `E_s`.
fn propagate(b: &LinkBudget, n_se: f64, es_se: f64) -> (f64, f64) {
    let n = b.signal_rate;
    let e = b.scatter_error + b.background_error;
    let d2 = (n + 2.0 * e).powi(2);
    let dq_dn = -e / d2;
    let dq_des = n / d2;
    let q_se = ((dq_dn * n_se).powi(2) + (dq_des * es_se).powi(2)).sqrt();
    let dk_dn = (1.0 - b.qber) / 2.0 - n / 2.0 * dq_dn;
    let dk_des = -n / 2.0 * dq_des;
    let k_se = ((dk_dn * n_se).powi(2) + (dk_des * es_se).powi(2)).sqrt();
    (q_se, k_se)
}

fn provenance(name: &str, series: &[Series]) -> Vec<(String, String)> {
    let mut hasher = Sha256::new();
    hasher.update(name.as_bytes());
    for s in series {
        hasher.update(s.label.as_bytes());
        hasher.update(s.config.canonical().as_bytes());
    }
    let hash: String = hasher.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect();

    let mut p = vec![("run".to_string(), name.to_string()), ("config_hash".to_string(), hash)];
    if let Some(first) = series.first() {
        let c = &first.config;
        p.push(("seed".into(), c.seed.to_string()));
        p.push(("photons_per_state".into(), c.photons.to_string()));
        p.push(("water".into(), format!("{} (extinction {} 1/m)", c.water.label(), c.extinction())));
        p.push(("wavelength_m".into(), c.wavelength.to_string()));
    }
    for s in series {
        let c = &s.config;
        let states: Vec<&str> = c.states.iter().map(|s| s.label()).collect();
        let env = c.environment.map(|e| e.label()).unwrap_or("none");
        let swept = c.sweep.as_ref().map(|sw| sw.key);
        let fixed: Vec<String> = [SweepKey::Distance, SweepKey::Aperture, SweepKey::Fov, SweepKey::Depth]
            .into_iter()
            .filter(|&k| Some(k) != swept)
            .map(|k| format!("{} {} {}", k.name(), c.get(k), k.unit()))
            .collect();
        let sweep = match &c.sweep {
            Some(sw) => format!("sweep {} [{}]", sw.key.name(), sw.key.unit()),
            None => "single point".to_string(),
        };
        p.push((
            format!("series {}", s.label),
            format!("{sweep}; {}; environment {env}; states {}", fixed.join("; "), states.join(" ")),
        ));
    }
    p.push(("columns".into(), "counts summed over states; rates in 1/s; angles in rad; lengths in m".into()));
    p
}

/// Runs the configuration's sweep (or single point) and writes the CSV to
/// `cfg.output` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable, HarnessError> {
    cfg.validate()?;
    let mut runner = Runner::new(cfg.workers.unwrap_or_else(default_workers));
    let table = runner.run("experiment", &[Series::new("experiment", cfg.clone())])?;
    if let Some(path) = &cfg.output {
        table.write(path)?;
    }
    Ok(table)
}
