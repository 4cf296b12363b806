use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::geometry::Vec3;

use super::{EvalError, FeaturePointSet};

fn parse_err(line: usize, message: impl Into<String>) -> EvalError {
    EvalError::Parse { line, message: message.into() }
}

fn data_lines<R: BufRead>(r: R) -> impl Iterator<Item = Result<(usize, Vec<String>), EvalError>> {
    r.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let l = l.trim();
            (!l.is_empty() && !l.starts_with('#')).then(|| Ok((i + 1, l.split_whitespace().map(String::from).collect())))
        }
    })
}

/// Lines `shape_id feature_id x y z`.
pub fn read_features<R: BufRead>(r: R) -> Result<BTreeMap<u32, BTreeMap<u32, Vec3>>, EvalError> {
    let mut out: BTreeMap<u32, BTreeMap<u32, Vec3>> = BTreeMap::new();
    for item in data_lines(r) {
        let (line, f) = item?;
        if f.len() != 5 {
            return Err(parse_err(line, "expected `shape_id feature_id x y z`"));
        }
        let id = |s: &str| s.parse::<u32>().map_err(|_| parse_err(line, format!("bad id {s}")));
        let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| parse_err(line, format!("bad coordinate {s}")));
        let p = Vec3::new(num(&f[2])?, num(&f[3])?, num(&f[4])?);
        if out.entry(id(&f[0])?).or_default().insert(id(&f[1])?, p).is_some() {
            return Err(parse_err(line, "duplicate feature"));
        }
    }
    Ok(out)
}

pub fn write_features<W: Write>(features: &FeaturePointSet, mut w: W) -> std::io::Result<()> {
    for (s, fs) in &features.shapes {
        for (f, p) in fs {
            writeln!(w, "{s} {f} {} {} {}", p.x, p.y, p.z)?;
        }
    }
    Ok(())
}

/// Lines `feature_id symmetric_feature_id`; the map must be an involution.
pub fn read_symmetry<R: BufRead>(r: R) -> Result<BTreeMap<u32, u32>, EvalError> {
    let mut out = BTreeMap::new();
    for item in data_lines(r) {
        let (line, f) = item?;
        if f.len() != 2 {
            return Err(parse_err(line, "expected `feature_id symmetric_feature_id`"));
        }
        let id = |s: &str| s.parse::<u32>().map_err(|_| parse_err(line, format!("bad id {s}")));
        out.insert(id(&f[0])?, id(&f[1])?);
    }
    for (&a, &b) in &out {
        match out.get(&b) {
            Some(&back) if back == a => {}
            None if a == b => {}
            _ => return Err(EvalError::NotInvolution(a)),
        }
    }
    Ok(out)
}

pub fn write_symmetry<W: Write>(symmetry: &BTreeMap<u32, u32>, mut w: W) -> std::io::Result<()> {
    for (a, b) in symmetry {
        writeln!(w, "{a} {b}")?;
    }
    Ok(())
}

/// Lines `x y z r g b`, colors in `[0, 1]`.
pub fn write_colored_points<W: Write>(points: &[Vec3], colors: &[[f64; 3]], mut w: W) -> std::io::Result<()> {
    for (p, c) in points.iter().zip(colors) {
        writeln!(w, "{} {} {} {:.6} {:.6} {:.6}", p.x, p.y, p.z, c[0], c[1], c[2])?;
    }
    Ok(())
}
