use std::io::Write;

use super::fitting::{fit_hyperparameters, FitConfig};
use super::variant::ModelVariant;
use crate::domain::Dataset;
use crate::error::{Error, Result};

/// Fit the full variant at each latent dimension and return `(d, loss)`.
pub fn latent_dim_sweep(dataset: &Dataset, dims: &[usize], config: &FitConfig) -> Result<Vec<(usize, f64)>> {
    if dims.is_empty() {
        return Err(Error::Invalid("latent-dimension sweep needs at least one dimension".into()));
    }
    dims.iter()
        .map(|&d| {
            let cfg = FitConfig {
                latent_dim: d,
                ..*config
            };
            fit_hyperparameters(dataset, ModelVariant::Full, &cfg).map(|r| (d, r.train_loss))
        })
        .collect()
}

/// Two-column CSV: `d, loss`.
pub fn write_sweep_csv(rows: &[(usize, f64)], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "loss"])?;
    for (d, l) in rows {
        w.write_record([d.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
