//! CSV persistence of closed-loop traces.

use std::io::{Read, Write};
use std::path::Path;

use magnmpc_core::sim::{SimulationTrace, TraceRow};

use crate::{csv_err, io_err, Error, Result};

/// Column order of the trace files. Moments in A·m², fields in tesla
/// (body frame), rates in rad/s.
pub const TRACE_HEADER: [&str; 25] = [
    "t_s", "q1", "q2", "q3", "q4", "wx_rad_s", "wy_rad_s", "wz_rad_s", "mc_x", "mc_y", "mc_z", "vc_x", "vc_y", "vc_z",
    "md_x", "md_y", "md_z", "residual_norm", "b_truth_x", "b_truth_y", "b_truth_z", "b_onboard_x", "b_onboard_y",
    "b_onboard_z", "solver_flag",
];

/// Nine significant digits.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.8e}")
}

fn record(r: &TraceRow) -> Vec<String> {
    let mut out = Vec::with_capacity(25);
    out.push(fmt_value(r.t));
    out.extend(r.x.iter().map(|v| fmt_value(*v)));
    out.extend(r.u_c.iter().map(|v| fmt_value(*v)));
    out.extend(r.u_d.iter().map(|v| fmt_value(*v)));
    out.push(fmt_value(r.residual_norm));
    out.extend(r.b_truth.iter().map(|v| fmt_value(*v)));
    out.extend(r.b_onboard.iter().map(|v| fmt_value(*v)));
    out.push(if r.solver_flag { "1".into() } else { "0".into() });
    out
}

pub fn write_trace<W: Write>(trace: &SimulationTrace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.rows {
        w.write_record(record(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace(trace: &SimulationTrace, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(io_err(path))?;
    write_trace(trace, std::io::BufWriter::new(f)).map_err(csv_err(path))
}

pub fn read_trace<R: Read>(input: R) -> csv::Result<SimulationTrace> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v = |k: usize| -> csv::Result<f64> {
            rec.get(k)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
        };
        let mut x = [0.0; 7];
        let mut u_c = [0.0; 6];
        let mut u_d = [0.0; 3];
        let mut b_truth = [0.0; 3];
        let mut b_onboard = [0.0; 3];
        for k in 0..7 {
            x[k] = v(1 + k)?;
        }
        for k in 0..6 {
            u_c[k] = v(8 + k)?;
        }
        for k in 0..3 {
            u_d[k] = v(14 + k)?;
            b_truth[k] = v(18 + k)?;
            b_onboard[k] = v(21 + k)?;
        }
        rows.push(TraceRow {
            t: v(0)?,
            x,
            u_c,
            u_d,
            residual_norm: v(17)?,
            b_truth,
            b_onboard,
            solver_flag: rec.get(24) == Some("1"),
        });
    }
    Ok(SimulationTrace { rows })
}

pub fn load_trace(path: &Path) -> Result<SimulationTrace> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    read_trace(f).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}
