//! Rolling response-history window backing the RL state.

/// Length-l buffers for relative acceleration, ground acceleration, raw RL
/// action, and LQR force. All start at zero each episode; the state vector is
/// their concatenation, oldest entries first.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    xddot: Vec<f64>,
    xg_ddot: Vec<f64>,
    u_tilde: Vec<f64>,
    u_star: Vec<f64>,
}

impl HistoryWindow {
    pub fn new(l: usize) -> Self {
        assert!(l >= 1, "history length must be >= 1");
        HistoryWindow {
            xddot: vec![0.0; l],
            xg_ddot: vec![0.0; l],
            u_tilde: vec![0.0; l],
            u_star: vec![0.0; l],
        }
    }

    pub fn len(&self) -> usize {
        self.xddot.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state_dim(&self) -> usize {
        4 * self.len()
    }

    /// Slide every buffer by one: drop the oldest entry, append the new one.
    pub fn push(&mut self, xddot: f64, xg_ddot: f64, u_tilde: f64, u_star: f64) {
        slide(&mut self.xddot, xddot);
        slide(&mut self.xg_ddot, xg_ddot);
        slide(&mut self.u_tilde, u_tilde);
        slide(&mut self.u_star, u_star);
    }

    /// `[ẍ…, ẍ^g…, ũ…, u*…]`, each block oldest → newest.
    pub fn state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.state_dim());
        s.extend_from_slice(&self.xddot);
        s.extend_from_slice(&self.xg_ddot);
        s.extend_from_slice(&self.u_tilde);
        s.extend_from_slice(&self.u_star);
        s
    }
}

fn slide(buf: &mut Vec<f64>, value: f64) {
    buf.remove(0);
    buf.push(value);
}
