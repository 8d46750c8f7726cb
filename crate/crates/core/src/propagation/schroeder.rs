use super::{ImpulseResponse, PropagationError};

/// Backward-integrated energy decay in dB, 0 dB at the first sample.
///
/// Samples after the last nonzero one are `-inf`.
pub fn schroeder_curve(ir: &ImpulseResponse) -> Result<Vec<f64>, PropagationError> {
    let mut tail = vec![0.0; ir.samples.len()];
    let mut acc = 0.0;
    for (t, x) in tail.iter_mut().zip(&ir.samples).rev() {
        acc += x * x;
        *t = acc;
    }
    if !(acc > 0.0) || !acc.is_finite() {
        return Err(PropagationError::UndefinedDecay);
    }
    Ok(tail.iter().map(|e| 10.0 * (e / acc).log10()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ir(samples: Vec<f64>) -> ImpulseResponse {
        ImpulseResponse { samples, sample_rate: 16000 }
    }

    #[test]
    fn single_spike_is_a_step() {
        let c = schroeder_curve(&ir(vec![0.0, 0.0, 0.7, 0.0, 0.0])).unwrap();
        assert_eq!(&c[..3], &[0.0, 0.0, 0.0]);
        assert!(c[3..].iter().all(|x| *x == f64::NEG_INFINITY));
    }

    #[test]
    fn silence_is_an_error() {
        assert!(matches!(schroeder_curve(&ir(vec![0.0; 10])), Err(PropagationError::UndefinedDecay)));
        assert!(schroeder_curve(&ir(Vec::new())).is_err());
    }

    #[test]
    fn exponential_decay_slope() {
        // Envelope exp(-t/tau) in amplitude decays at 20 log10(e) / tau dB/s.
        let fs = 16000.0;
        let tau = 0.1;
        let samples: Vec<f64> = (0..16000)
            .map(|n| {
                let t = n as f64 / fs;
                let sign = if (n * 7919) % 13 < 6 { -1.0 } else { 1.0 };
                sign * (-t / tau).exp()
            })
            .collect();
        let c = schroeder_curve(&ir(samples)).unwrap();
        let (a, b) = (1600, 4800);
        let slope = (c[b] - c[a]) / ((b - a) as f64 / fs);
        let expected = -20.0 * std::f64::consts::E.log10() / tau;
        assert!((slope - expected).abs() < 0.05 * expected.abs(), "{slope} vs {expected}");
    }
}
