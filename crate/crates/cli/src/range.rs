//! Value lists on the command line: `a:b:step`, comma lists, or a single number.

use crate::CliError;

/// Parses `a:b:step` (inclusive of `b` up to rounding), `x,y,z`, or `x`.
pub fn parse_values(s: &str) -> Result<Vec<f64>, CliError> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!("range `{s}` must look like a:b:step")));
        }
        let [a, b, step] = [number(parts[0])?, number(parts[1])?, number(parts[2])?];
        if !(step > 0.0) {
            return Err(CliError::Usage(format!("range `{s}` needs a positive step")));
        }
        if b < a {
            return Err(CliError::Usage(format!("range `{s}` is empty")));
        }
        // Multiplying out avoids accumulated drift; the slack keeps `b` itself.
        let count = ((b - a) / step + 1e-9).floor() as usize;
        if count > 1_000_000 {
            return Err(CliError::Usage(format!("range `{s}` has too many points")));
        }
        return Ok((0..=count).map(|k| a + k as f64 * step).collect());
    }
    s.split(',').map(number).collect()
}

fn number(s: &str) -> Result<f64, CliError> {
    let v: f64 = s.trim().parse().map_err(|_| CliError::Usage(format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::Usage(format!("`{s}` is not finite")));
    }
    Ok(v)
}

/// Points as `x1,y1;x2,y2;...`, all of the same dimension.
pub fn parse_points(s: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let points: Vec<Vec<f64>> =
        s.split(';').filter(|p| !p.trim().is_empty()).map(|p| p.split(',').map(number).collect()).collect::<Result<_, _>>()?;
    check_points(points)
}

/// One point per line, comma separated; a non-numeric first line is a header.
pub fn parse_points_csv(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    if let Some(first) = lines.peek() {
        if first.split(',').any(|c| c.trim().parse::<f64>().is_err()) {
            lines.next();
        }
    }
    let points = lines.map(|l| l.split(',').map(number).collect()).collect::<Result<_, _>>()?;
    check_points(points)
}

fn check_points(points: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, CliError> {
    let d = points.first().map(Vec::len).ok_or_else(|| CliError::Usage("no points given".into()))?;
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(CliError::Usage("points must share one nonzero dimension".into()));
    }
    Ok(points)
}
