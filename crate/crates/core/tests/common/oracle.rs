//! Brute-force restatements of the profile lookup rules, written without
//! reference to the library's implementation.

use snvse::profile_db::ProfileEntry;
use snvse::Resolution;

fn pixels(r: Resolution) -> u64 {
    r.width as u64 * r.height as u64
}

fn dist2(a: Resolution, b: Resolution) -> i64 {
    let dw = a.width as i64 - b.width as i64;
    let dh = a.height as i64 - b.height as i64;
    dw * dw + dh * dh
}

/// Input resolution to follow: `rho` itself when present, otherwise the
/// closest input (ties: more pixels, then wider).
pub fn chosen_input(rho: Resolution, entries: &[ProfileEntry]) -> Option<(Resolution, bool)> {
    if entries.is_empty() {
        return None;
    }
    if entries.iter().any(|e| e.rho_in == rho) {
        return Some((rho, true));
    }
    let best = entries.iter().map(|e| dist2(e.rho_in, rho)).min()?;
    let mut pool: Vec<Resolution> = entries
        .iter()
        .map(|e| e.rho_in)
        .filter(|r| dist2(*r, rho) == best)
        .collect();
    let most = pool.iter().map(|r| pixels(*r)).max()?;
    pool.retain(|r| pixels(*r) == most);
    let widest = pool.iter().map(|r| r.width).max()?;
    pool.retain(|r| r.width == widest);
    Some((pool[0], false))
}

/// Most frequent output among entries with the chosen input
/// (ties: more pixels, then wider).
pub fn chosen_output(rho: Resolution, entries: &[ProfileEntry]) -> Option<(Resolution, bool)> {
    let (input, exact) = chosen_input(rho, entries)?;
    let mut tally: Vec<(Resolution, usize)> = Vec::new();
    for e in entries.iter().filter(|e| e.rho_in == input) {
        match tally.iter_mut().find(|(r, _)| *r == e.rho_out) {
            Some((_, n)) => *n += 1,
            None => tally.push((e.rho_out, 1)),
        }
    }
    tally.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(pixels(b.0).cmp(&pixels(a.0)))
            .then(b.0.width.cmp(&a.0.width))
    });
    Some((tally[0].0, exact))
}

/// Mean CRF over entries with output `rho_star`; `None` if there are none.
pub fn mean_crf(rho_star: Resolution, entries: &[ProfileEntry], include_saturated: bool) -> Option<(f64, usize)> {
    let values: Vec<f64> = entries
        .iter()
        .filter(|e| e.rho_out == rho_star && (include_saturated || !e.saturated))
        .map(|e| e.crf_hat as f64)
        .collect();
    if values.is_empty() {
        return None;
    }
    Some((values.iter().sum::<f64>() / values.len() as f64, values.len()))
}
