use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fastconv::generator::{default_points, describe, generate, verify_exact, PointSet};

use crate::BenchError;

/// Generates `F(m, r)`, checks it exactly on `trials` random 1-d and 2-d
/// cases and returns the printed description.
pub fn run_gen(m: usize, r: usize, points: Option<&str>, trials: usize, seed: u64) -> Result<String, BenchError> {
    if m == 0 || r == 0 {
        return Err(BenchError::Usage("m and r must be at least 1".into()));
    }
    let points = match points {
        Some(p) => PointSet::parse(p).map_err(|e| BenchError::Usage(e.to_string()))?,
        None => default_points(m, r),
    };
    let alg = generate(m, r, &points).map_err(|e| BenchError::Usage(e.to_string()))?;
    let mut text = describe(&alg, Some(&points));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match verify_exact(&alg, trials, &mut rng) {
        Ok(()) => {
            text += &format!("verified: {trials} random cases exact in 1D and 2D\n");
            Ok(text)
        }
        Err(msg) => Err(BenchError::Verification(format!("{text}verification failed: {msg}"))),
    }
}
