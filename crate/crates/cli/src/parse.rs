//! Flag value parsers.

use comtrap::fewbody::Interaction;

fn number(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

/// Comma-separated list of finite numbers.
pub fn list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(number).collect()
}

/// A comma-separated list kept as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct Floats(pub Vec<f64>);

pub fn floats(s: &str) -> Result<Floats, String> {
    list(s).map(Floats)
}

/// `x,y,z`.
pub fn vec3(s: &str) -> Result<[f64; 3], String> {
    let v = list(s)?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected 3 components, got {}", v.len()))
}

/// `start:stop:step`.
pub fn range(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, c] => Ok((number(a)?, number(b)?, number(c)?)),
        _ => Err(format!("expected start:stop:step, got {s:?}")),
    }
}

/// `harmonic:κ` or `gaussian:g,s`.
pub fn interaction(s: &str) -> Result<Interaction, String> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("expected harmonic:κ or gaussian:g,s, got {s:?}"))?;
    let v = list(rest)?;
    match (kind, v.as_slice()) {
        ("harmonic", [kappa]) => Ok(Interaction::Harmonic { kappa: *kappa }),
        ("gaussian", [g, w]) => Ok(Interaction::Gaussian { g: *g, s: *w }),
        _ => Err(format!("expected harmonic:κ or gaussian:g,s, got {s:?}")),
    }
}

/// `N,L`: points per axis and half-width.
pub fn grid(s: &str) -> Result<(usize, f64), String> {
    let (n, l) = s.split_once(',').ok_or_else(|| format!("expected N,L, got {s:?}"))?;
    let n: usize = n.trim().parse().map_err(|_| format!("not a point count: {n:?}"))?;
    Ok((n, number(l)?))
}
