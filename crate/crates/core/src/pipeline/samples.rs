use std::io::{BufRead, Write};

use crate::geometry::{PointSample, Vec3};

use super::PipelineError;

/// One `x y z nx ny nz face label` line per sample; `label` is `-` when
/// the mesh has none. Coordinates use the shortest exact decimal form.
pub fn write_samples<W: Write>(samples: &[PointSample], mut w: W) -> std::io::Result<()> {
    for s in samples {
        let p = s.position;
        let n = s.normal;
        write!(w, "{} {} {} {} {} {} {} ", p.x, p.y, p.z, n.x, n.y, n.z, s.face_id)?;
        match s.label {
            Some(l) => writeln!(w, "{l}")?,
            None => writeln!(w, "-")?,
        }
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(r: R) -> Result<Vec<PointSample>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = || PipelineError::Input(format!("samples line {}: expected `x y z nx ny nz face label`", i + 1));
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 8 {
            return Err(bad());
        }
        let v: Vec<f64> = f[..6].iter().map(|s| s.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        out.push(PointSample {
            position: Vec3::new(v[0], v[1], v[2]),
            normal: Vec3::new(v[3], v[4], v[5]),
            face_id: f[6].parse().map_err(|_| bad())?,
            label: match f[7] {
                "-" => None,
                l => Some(l.parse().map_err(|_| bad())?),
            },
        });
    }
    Ok(out)
}
