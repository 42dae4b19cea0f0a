//! On-disk model bundle: the basis network, robot model, discriminator,
//! normalizers, per-condition statistics, and optional baselines, stored as
//! one directory.

use crate::basis::LinearCoeff;
use crate::features::Normalizer;
use crate::train::{LossCurves, ResidualBaseline, TrainedObjectModel};
use crate::AdaptiveError;
use pushnav_neural::{io as nio, Mlp};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Everything a controller or evaluator needs at run time.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub psi: Mlp,
    pub robot_net: Mlp,
    pub discriminator: Option<Mlp>,
    pub feat_norm: Normalizer,
    pub robot_norm: Normalizer,
    pub coeffs: Vec<LinearCoeff>,
    pub sigma_by_condition: Vec<[f64; 3]>,
    pub robot_held_out_mse: f64,
    pub curves: LossCurves,
    /// Residual baseline, when trained: pooled net + residual basis model.
    pub residual: Option<ResidualPart>,
}

/// Persisted part of the residual baseline.
#[derive(Debug, Clone)]
pub struct ResidualPart {
    pub n_net: Mlp,
    pub psi: Mlp,
    pub feat_norm: Normalizer,
    pub coeffs: Vec<LinearCoeff>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleMeta {
    format: String,
    feat_norm: Normalizer,
    robot_norm: Normalizer,
    coeffs: Vec<LinearCoeff>,
    sigma_by_condition: Vec<[f64; 3]>,
    robot_held_out_mse: f64,
    has_discriminator: bool,
    has_residual: bool,
    residual_coeffs: Vec<LinearCoeff>,
    residual_feat_norm: Option<Normalizer>,
}

impl ModelBundle {
    /// Assemble a bundle from training outputs.
    pub fn from_parts(
        object_model: TrainedObjectModel,
        robot_net: Mlp,
        robot_norm: Normalizer,
        robot_held_out_mse: f64,
        residual: Option<ResidualBaseline>,
    ) -> Self {
        ModelBundle {
            psi: object_model.psi,
            robot_net,
            discriminator: object_model.discriminator,
            feat_norm: object_model.feat_norm,
            robot_norm,
            coeffs: object_model.coeffs,
            sigma_by_condition: object_model.sigma_by_condition,
            robot_held_out_mse,
            curves: object_model.curves,
            residual: residual.map(|r| ResidualPart {
                n_net: r.n_net,
                feat_norm: r.model.feat_norm,
                psi: r.model.psi,
                coeffs: r.model.coeffs,
            }),
        }
    }

    /// Write the bundle directory (created if needed).
    pub fn save(&self, dir: &Path) -> Result<(), AdaptiveError> {
        let io_err = |e: std::io::Error| AdaptiveError::Bundle(e.to_string());
        std::fs::create_dir_all(dir).map_err(io_err)?;
        nio::save(&self.psi, &dir.join("psi.mlp")).map_err(io_err)?;
        nio::save(&self.robot_net, &dir.join("robot.mlp")).map_err(io_err)?;
        if let Some(d) = &self.discriminator {
            nio::save(d, &dir.join("disc.mlp")).map_err(io_err)?;
        }
        if let Some(r) = &self.residual {
            nio::save(&r.n_net, &dir.join("residual_n.mlp")).map_err(io_err)?;
            nio::save(&r.psi, &dir.join("residual_psi.mlp")).map_err(io_err)?;
        }
        let meta = BundleMeta {
            format: "bundle-v1".into(),
            feat_norm: self.feat_norm.clone(),
            robot_norm: self.robot_norm.clone(),
            coeffs: self.coeffs.clone(),
            sigma_by_condition: self.sigma_by_condition.clone(),
            robot_held_out_mse: self.robot_held_out_mse,
            has_discriminator: self.discriminator.is_some(),
            has_residual: self.residual.is_some(),
            residual_coeffs: self
                .residual
                .as_ref()
                .map(|r| r.coeffs.clone())
                .unwrap_or_default(),
            residual_feat_norm: self.residual.as_ref().map(|r| r.feat_norm.clone()),
        };
        let meta_json =
            serde_json::to_string_pretty(&meta).map_err(|e| AdaptiveError::Bundle(e.to_string()))?;
        std::fs::write(dir.join("meta.json"), meta_json).map_err(io_err)?;

        // Loss curves as CSV for quick inspection.
        let mut csv = String::from("iter,prediction,cross_entropy\n");
        for (i, (p, ce)) in self
            .curves
            .prediction
            .iter()
            .zip(&self.curves.cross_entropy)
            .enumerate()
        {
            csv.push_str(&format!("{i},{p},{ce}\n"));
        }
        std::fs::write(dir.join("curves.csv"), csv).map_err(io_err)?;
        Ok(())
    }

    /// Load a bundle directory.
    pub fn load(dir: &Path) -> Result<Self, AdaptiveError> {
        let meta_text = std::fs::read_to_string(dir.join("meta.json"))
            .map_err(|e| AdaptiveError::Bundle(format!("{}: {e}", dir.display())))?;
        let meta: BundleMeta =
            serde_json::from_str(&meta_text).map_err(|e| AdaptiveError::Bundle(e.to_string()))?;
        if meta.format != "bundle-v1" {
            return Err(AdaptiveError::Bundle(format!(
                "unknown bundle format {}",
                meta.format
            )));
        }
        let psi = nio::load(&dir.join("psi.mlp"))?;
        let robot_net = nio::load(&dir.join("robot.mlp"))?;
        let discriminator = if meta.has_discriminator {
            Some(nio::load(&dir.join("disc.mlp"))?)
        } else {
            None
        };
        let residual = if meta.has_residual {
            Some(ResidualPart {
                n_net: nio::load(&dir.join("residual_n.mlp"))?,
                psi: nio::load(&dir.join("residual_psi.mlp"))?,
                feat_norm: meta
                    .residual_feat_norm
                    .clone()
                    .ok_or_else(|| AdaptiveError::Bundle("missing residual normalizer".into()))?,
                coeffs: meta.residual_coeffs.clone(),
            })
        } else {
            None
        };
        Ok(ModelBundle {
            psi,
            robot_net,
            discriminator,
            feat_norm: meta.feat_norm,
            robot_norm: meta.robot_norm,
            coeffs: meta.coeffs,
            sigma_by_condition: meta.sigma_by_condition,
            robot_held_out_mse: meta.robot_held_out_mse,
            curves: LossCurves::default(),
            residual,
        })
    }
}
