use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use crate::link::SecurityVerdict;

use super::HarnessError;

pub const COLUMNS: [&str; 21] = [
    "series",
    "sweep_value",
    "received_ballistic",
    "received_scattered",
    "fidelity_h",
    "fidelity_v",
    "fidelity_p",
    "fidelity_m",
    "signal_rate",
    "scatter_error",
    "background_error",
    "qber",
    "verdict",
    "kappa",
    "signal_rate_se",
    "fidelity_h_se",
    "fidelity_v_se",
    "fidelity_p_se",
    "fidelity_m_se",
    "qber_se",
    "kappa_se",
];

/// One sweep point. Counts are summed over the prepared states; fidelities
/// are indexed H, V, P, M and empty for states that were not prepared or
/// received no scattered photons.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub series: String,
    pub sweep_value: f64,
    pub received_ballistic: u64,
    pub received_scattered: u64,
    pub fidelity: [Option<f64>; 4],
    pub signal_rate: f64,
    pub scatter_error: f64,
    pub background_error: f64,
    pub qber: Option<f64>,
    pub verdict: Option<SecurityVerdict>,
    pub kappa: Option<f64>,
    pub signal_rate_se: f64,
    pub fidelity_se: [Option<f64>; 4],
    pub qber_se: Option<f64>,
    pub kappa_se: Option<f64>,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

impl ResultRow {
    pub fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.series.clone(),
            float(self.sweep_value),
            self.received_ballistic.to_string(),
            self.received_scattered.to_string(),
        ];
        f.extend(self.fidelity.iter().map(|&v| opt(v)));
        f.push(float(self.signal_rate));
        f.push(float(self.scatter_error));
        f.push(float(self.background_error));
        f.push(opt(self.qber));
        f.push(self.verdict.map(|v| v.label().to_string()).unwrap_or_default());
        f.push(opt(self.kappa));
        f.push(float(self.signal_rate_se));
        f.extend(self.fidelity_se.iter().map(|&v| opt(v)));
        f.push(opt(self.qber_se));
        f.push(opt(self.kappa_se));
        f
    }
}

/// Rows plus the `# key: value` provenance block written above them.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub provenance: Vec<(String, String)>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// CSV text. `timestamp` is the only field that varies between
    /// otherwise identical runs.
    pub fn to_csv(&self, timestamp: Option<u64>) -> String {
        let mut s = String::new();
        for (k, v) in &self.provenance {
            let _ = writeln!(s, "# {k}: {v}");
        }
        if let Some(t) = timestamp {
            let _ = writeln!(s, "# generated_unix: {t}");
        }
        let _ = writeln!(s, "{}", COLUMNS.join(","));
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.fields().join(","));
        }
        s
    }

    pub fn provenance_value(&self, key: &str) -> Option<&str> {
        self.provenance.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Writes the CSV with the current time, removing the file if the write fails.
    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let text = self.to_csv(Some(now));
        let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
        let result = File::create(path).and_then(|mut f| {
            f.write_all(text.as_bytes())?;
            f.sync_all()
        });
        if let Err(e) = result {
            let _ = std::fs::remove_file(path);
            return Err(io(e));
        }
        Ok(())
    }
}
