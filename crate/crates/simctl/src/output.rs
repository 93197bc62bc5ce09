//! On-disk formats.
//!
//! `snapshots/t_NNNNN.csv`: one row per grid point.
//! - ε-runs: `x,phi,u,D`
//! - limit runs: `x,phi,env,D` with `env = I⋆μ`
//!
//! `diagnostics.csv`: one row per sample with columns
//! `t,mass,max_phi,lipschitz,min_second_diff,min_heps,dissipation_cum,
//! component_count,components,atoms,reanchor,empty_support`. `components`
//! is `a:b` intervals joined by `;`, `atoms` is `x@mass` joined by `;`.
//!
//! `events.jsonl`: one JSON object per line with a `kind` field.
//!
//! Floats are printed in Rust's shortest round-trip form, so identical runs
//! give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use selmut::{DiagnosticsRecord, ForwardSample, LimitSample};

use crate::manifest::write_atomic;

pub const DIAGNOSTICS_HEADER: &str =
    "t,mass,max_phi,lipschitz,min_second_diff,min_heps,dissipation_cum,component_count,components,atoms,reanchor,empty_support";

pub fn diagnostics_row(r: &DiagnosticsRecord) -> String {
    let comps = r
        .components
        .iter()
        .map(|(a, b)| format!("{a}:{b}"))
        .collect::<Vec<_>>()
        .join(";");
    let atoms = r
        .atoms
        .atoms()
        .iter()
        .map(|a| format!("{}@{}", a.x, a.mass))
        .collect::<Vec<_>>()
        .join(";");
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.t,
        r.mass,
        r.max_phi,
        r.lipschitz,
        r.min_second_diff,
        r.min_heps,
        r.dissipation_cum,
        r.component_count,
        comps,
        atoms,
        r.reanchor_magnitude,
        r.empty_support
    )
}

pub fn diagnostics_csv<'a>(records: impl Iterator<Item = &'a DiagnosticsRecord>) -> String {
    let mut s = String::from(DIAGNOSTICS_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&diagnostics_row(r));
        s.push('\n');
    }
    s
}

fn snapshot_csv(header: &str, xs: impl Iterator<Item = f64>, cols: [&[f64]; 3]) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for (k, x) in xs.enumerate() {
        let _ = writeln!(s, "{x},{},{},{}", cols[0][k], cols[1][k], cols[2][k]);
    }
    s
}

pub fn forward_snapshot(sample: &ForwardSample) -> String {
    let st = &sample.state;
    snapshot_csv(
        "x,phi,u,D",
        st.phi.grid().points(),
        [st.phi.values(), st.u.values(), st.d.values()],
    )
}

pub fn limit_snapshot(sample: &LimitSample) -> String {
    let st = &sample.state;
    snapshot_csv(
        "x,phi,env,D",
        st.phi.grid().points(),
        [st.phi.values(), st.environment.values(), st.d.values()],
    )
}

pub fn jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
        .collect()
}

/// Collects written files relative to an output directory.
pub struct Writer<'a> {
    pub dir: &'a Path,
    pub written: Vec<String>,
}

impl<'a> Writer<'a> {
    pub fn new(dir: &'a Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer {
            dir,
            written: Vec::new(),
        })
    }

    pub fn put(&mut self, rel: &str, contents: &str) -> std::io::Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write_atomic(&path, contents.as_bytes())?;
        self.written.push(rel.to_string());
        Ok(())
    }

    pub fn put_json<T: Serialize>(&mut self, rel: &str, value: &T) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
        self.put(rel, &text)
    }

    /// Snapshots every `every` samples (and the last one) under
    /// `prefix/snapshots`; 0 writes none.
    pub fn snapshots<S>(
        &mut self,
        prefix: &str,
        samples: &[S],
        every: usize,
        render: impl Fn(&S) -> String,
    ) -> std::io::Result<()> {
        if every == 0 {
            return Ok(());
        }
        let base = if prefix.is_empty() {
            "snapshots".to_string()
        } else {
            format!("{prefix}/snapshots")
        };
        for (k, s) in samples.iter().enumerate() {
            if k % every == 0 || k + 1 == samples.len() {
                self.put(&format!("{base}/t_{k:05}.csv"), &render(s))?;
            }
        }
        Ok(())
    }
}
