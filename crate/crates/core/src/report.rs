//! CSV outputs (plans, training metrics, rollout traces) and atomic writes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, PlanMatrix};
use crate::scalar::Scalar;
use crate::simulator::TraceRow;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// `year,<asset ids...>,annual_cost`, one row per year (1-based).
pub fn plan_to_csv<T: Scalar>(network: &NetworkSpec<T>, plan: &PlanMatrix<T>) -> String {
    let mut s = String::from("year");
    for a in network.assets() {
        s.push(',');
        s.push_str(&a.id);
    }
    s.push_str(",annual_cost\n");
    for (t, (row, cost)) in plan.x().iter().zip(plan.annual_cost()).enumerate() {
        let _ = write!(s, "{}", t + 1);
        for &x in row {
            s.push_str(if x { ",1" } else { ",0" });
        }
        let _ = writeln!(s, ",{}", cost.to_f64_lossy());
    }
    s
}

/// Parses a plan CSV against `network`. Asset columns are matched by id; the
/// `annual_cost` column is informational and recomputed from the network.
pub fn plan_from_csv<T: Scalar>(network: &NetworkSpec<T>, text: &str) -> Result<PlanMatrix<T>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Parse("plan file is empty".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    if header.first() != Some(&"year") {
        return Err(Error::Parse("plan header must start with `year`".into()));
    }
    let mut columns = Vec::new();
    for (c, name) in header.iter().enumerate().skip(1) {
        if *name == "annual_cost" {
            continue;
        }
        columns.push((c, network.index_of(name)?));
    }
    if columns.len() != network.n() {
        return Err(Error::Dimension { expected: network.n(), got: columns.len() });
    }
    let mut x = Vec::new();
    for (r, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(Error::Parse(format!("plan row {} has {} fields, expected {}", r + 1, fields.len(), header.len())));
        }
        let mut row = vec![false; network.n()];
        for &(c, i) in &columns {
            row[i] = match fields[c] {
                "1" => true,
                "0" => false,
                other => return Err(Error::Parse(format!("plan row {} column {}: expected 0/1, got {other}", r + 1, header[c]))),
            };
        }
        x.push(row);
    }
    PlanMatrix::new(network, x)
}

pub fn write_plan<T: Scalar>(network: &NetworkSpec<T>, plan: &PlanMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), plan_to_csv(network, plan).as_bytes())
}

pub fn read_plan<T: Scalar>(network: &NetworkSpec<T>, path: impl AsRef<Path>) -> Result<PlanMatrix<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    plan_from_csv(network, &text)
}

/// Per-episode training statistics. Loss columns are empty for agents that
/// do not have the corresponding network.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub ret: f64,
    pub alpha: Option<f64>,
    pub max_critic_loss: Option<f64>,
    pub actor1_loss: Option<f64>,
    pub actor2_loss: Option<f64>,
    pub best_return_so_far: f64,
}

pub const METRICS_HEADER: &str = "episode,return,alpha,max_critic_loss,actor1_loss,actor2_loss,best_return_so_far";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_to_csv(rows: &[EpisodeMetrics]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for m in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            m.episode,
            m.ret,
            opt(m.alpha),
            opt(m.max_critic_loss),
            opt(m.actor1_loss),
            opt(m.actor2_loss),
            m.best_return_so_far
        );
    }
    s
}

pub const TRACE_HEADER: &str = "episode,year,annual_cost,reward,los,b_r,selected_ids";

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut s = format!("{TRACE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.episode,
            r.year,
            r.annual_cost,
            r.reward,
            r.los,
            r.b_r,
            r.selected_ids.join(";")
        );
    }
    s
}
