use std::io::Write;

use onesided::grid::SampledFunction;

/// `x,value` rows at cell left boundaries, numbers in shortest round-trip form.
pub fn write_function_csv(out: impl Write, f: &SampledFunction) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "value"])?;
    for (i, v) in f.values.iter().enumerate() {
        w.write_record([number(f.grid.boundary(i)), number(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn number(v: f64) -> String {
    format!("{v:?}")
}
