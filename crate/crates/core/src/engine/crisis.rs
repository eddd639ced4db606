//! Crisis detection on the monthly failure series.

/// Flags months where failures plus assistances over the trailing `window`
/// months exceed `threshold` times the live bank count at the window's start,
/// then merges contiguous flagged months into one crisis dated at its first
/// month. `events[t]` counts the failures and assistances of month `t`;
/// `live_at_start[t]` is the number of non-bankrupt banks entering month `t`.
/// Returns the 0-based start month of each crisis, ascending.
pub fn detect_crises(events: &[usize], live_at_start: &[usize], threshold: f64, window: usize) -> Vec<usize> {
    assert_eq!(events.len(), live_at_start.len(), "series lengths differ");
    let window = window.max(1);
    let mut crises = Vec::new();
    let mut rolling = 0usize;
    let mut in_crisis = false;
    for t in 0..events.len() {
        rolling += events[t];
        if t >= window {
            rolling -= events[t - window];
        }
        let start = (t + 1).saturating_sub(window);
        let flagged = rolling as f64 > threshold * live_at_start[start] as f64;
        if flagged && !in_crisis {
            crises.push(t);
        }
        in_crisis = flagged;
    }
    crises
}
