//! CSV and JSON artifacts. States and actions are written as 1-based
//! indices; players keep their 0-based index so that the deviator is
//! player 0.

use std::io::{Read, Write};

use serde::Serialize;

use crate::best_response::ValuePath;
use crate::error::{Error, Result};
use crate::game::{GameSpec, TimeGrid};
use crate::path::PopulationPath;
use crate::sim::SimTrace;
use crate::strategy::LocalStrategy;

/// Header `t,m_1,...,m_E`.
pub fn write_path<W: Write>(w: W, path: &PopulationPath) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.n_states()).map(|j| format!("m_{j}")));
    out.write_record(&header)?;
    for k in 0..path.grid().n_points() {
        let mut row = vec![path.grid().time(k).to_string()];
        row.extend(path.at(k).iter().map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Header `t,state,action,prob`; `t` is the start of each interval.
pub fn write_strategy<W: Write>(w: W, s: &LocalStrategy) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "state", "action", "prob"])?;
    for k in 0..s.grid().n_steps() {
        let t = s.grid().time(k).to_string();
        for i in 0..s.n_states() {
            for (a, p) in s.probs(k, i).iter().enumerate() {
                out.write_record([t.clone(), (i + 1).to_string(), (a + 1).to_string(), p.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Header `t,state,value`.
pub fn write_values<W: Write>(w: W, v: &ValuePath) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "state", "value"])?;
    for k in 0..v.grid().n_points() {
        let t = v.grid().time(k).to_string();
        for (i, x) in v.at(k).iter().enumerate() {
            out.write_record([t.clone(), (i + 1).to_string(), x.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Header `t,event_player,new_state,M_1,...,M_E`; the event columns are
/// empty for rows that are not jumps.
pub fn write_trace<W: Write>(w: W, trace: &SimTrace) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string(), "event_player".into(), "new_state".into()];
    header.extend((1..=trace.n_states).map(|j| format!("M_{j}")));
    out.write_record(&header)?;
    for r in 0..trace.n_rows() {
        let mut row = vec![
            trace.times[r].to_string(),
            trace.event_player[r].map(|p| p.to_string()).unwrap_or_default(),
            trace.new_state[r].map(|s| (s + 1).to_string()).unwrap_or_default(),
        ];
        row.extend(trace.empirical(r).iter().map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Reads a `t,state,action,prob` file. The file's interval starts must be
/// evenly spaced and end at `t_end`; missing rows are zero, and every
/// (interval, state) must sum to one.
pub fn read_strategy<R: Read>(r: R, spec: &GameSpec, t_end: f64) -> Result<LocalStrategy> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "state", "action", "prob"] {
        return Err(Error::Format(format!(
            "strategy file header must be t,state,action,prob, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (e, a) = (spec.n_states(), spec.n_actions());
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let field = |idx: usize| rec.get(idx).unwrap_or("").trim().to_string();
        let t: f64 = field(0)
            .parse()
            .map_err(|_| Error::Format(format!("line {line}: bad time `{}`", field(0))))?;
        let i = spec
            .state_index(&field(1))
            .or_else(|| field(1).parse::<usize>().ok().filter(|&i| i >= 1 && i <= e).map(|i| i - 1))
            .ok_or_else(|| Error::Format(format!("line {line}: unknown state `{}`", field(1))))?;
        let act = spec
            .action_index(&field(2))
            .ok_or_else(|| Error::Format(format!("line {line}: unknown action `{}`", field(2))))?;
        let p: f64 = field(3)
            .parse()
            .map_err(|_| Error::Format(format!("line {line}: bad probability `{}`", field(3))))?;
        rows.push((t, i, act, p));
    }
    if rows.is_empty() {
        return Err(Error::Format("strategy file has no rows".into()));
    }
    let mut times: Vec<f64> = rows.iter().map(|r| r.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let n_steps = times.len();
    let grid = TimeGrid::new(t_end, n_steps)?;
    for (k, t) in times.iter().enumerate() {
        if (t - grid.time(k)).abs() > 1e-9 * t_end.max(1.0) {
            return Err(Error::GridMismatch(format!(
                "strategy interval starts do not form a uniform grid ending at {t_end} (found t={t}, expected {})",
                grid.time(k)
            )));
        }
    }
    let mut probs = vec![0.0; n_steps * e * a];
    for (t, i, act, p) in rows {
        let k = times.iter().position(|x| *x == t).unwrap_or(0);
        probs[(k * e + i) * a + act] = p;
    }
    LocalStrategy::new(grid, e, a, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    #[test]
    fn strategy_round_trip() {
        let spec = scenario::prisoner_mfg(0.5);
        let grid = TimeGrid::new(4.0, 4).unwrap();
        let s = LocalStrategy::switch_at(grid, 2, 2, 0, 1, 2.0);
        let mut buf = Vec::new();
        write_strategy(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,state,action,prob\n0,1,1,1\n"));
        let back = read_strategy(&buf[..], &spec, 4.0).unwrap();
        assert_eq!(back, s);
        assert!(read_strategy(&buf[..], &spec, 5.0).is_err());
    }

    #[test]
    fn path_header() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let p = PopulationPath::constant(grid, &[0.25, 0.75]);
        let mut buf = Vec::new();
        write_path(&mut buf, &p).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,m_1,m_2\n0,0.25,0.75\n1,0.25,0.75\n");
    }
}
