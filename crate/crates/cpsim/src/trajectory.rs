use std::io::Write;

use cpsim_core::ProportionTrajectory;

use crate::sweep::SCHEMA_LINE;

/// Writes `t, f_1, …, f_k`.
pub fn write_trajectory_csv<W: Write>(traj: &ProportionTrajectory, mut out: W) -> Result<(), csv::Error> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let k = traj.f.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_owned()];
    header.extend((1..=k).map(|i| format!("f_{i}")));
    w.write_record(&header)?;
    for (t, f) in traj.times.iter().zip(&traj.f) {
        let mut rec = vec![t.to_string()];
        rec.extend(f.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
