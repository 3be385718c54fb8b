//! Reporting helpers for the acceptance target.

/// Collects one PASS/FAIL line per criterion.
#[derive(Debug, Default)]
pub struct Report {
    pub failed: Vec<u32>,
    pub total: usize,
}

impl Report {
    pub fn line(&mut self, id: u32, ok: bool, what: &str, detail: String) {
        println!("{} [{id}] {what}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.total += 1;
        if !ok {
            self.failed.push(id);
        }
    }

    pub fn summary(&self) -> String {
        format!("acceptance: {} of {} criteria pass; failing: {:?}", self.total - self.failed.len(), self.total, self.failed)
    }
}

pub fn info(id: u32, text: String) {
    println!("INFO [{id}] {text}");
}

/// n log-spaced points from a to b.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}
