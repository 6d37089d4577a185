//! Alternating GAN training: phase 1 with LDR recording, phase 2 with
//! score-weighted minibatches and an auxiliary discriminator, plus the
//! Top-k and GOLD generator baselines.

pub mod loss;
mod train;

pub use loss::{
    d_loss, d_loss_hinge, d_loss_ns, g_loss_hinge, g_loss_ns, gold_g_loss, gold_weights, topk_g_loss, topk_indices,
    DiscriminatorLoss, GeneratorLoss, LossKind,
};
pub use train::{
    continue_uniform, generate, record_values, train_phase1, train_phase2, write_curve_csv, CurvePoint, Phase1Output,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::checkpoint::Checkpoint;
use crate::numcore::{Activation, AdamConfig, AdamState, Mlp};
use crate::rng;

/// Fully-connected generator and discriminator shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub latent_dim: usize,
    pub data_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
}

impl Default for Architecture {
    /// Three hidden layers of 512 ReLU units, 2-D latent and data.
    fn default() -> Self {
        Architecture { latent_dim: 2, data_dim: 2, hidden_width: 512, hidden_layers: 3 }
    }
}

impl Architecture {
    pub fn generator_dims(&self) -> Vec<usize> {
        self.dims(self.latent_dim, self.data_dim)
    }

    pub fn discriminator_dims(&self) -> Vec<usize> {
        self.dims(self.data_dim, 1)
    }

    fn dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        dims.push(output);
        dims
    }
}

/// How the generator update uses the fake batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorObjective {
    #[default]
    Standard,
    TopK {
        fraction: f64,
    },
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub total_steps: u64,
    pub phase1_steps: u64,
    /// Recording starts after this many completed steps.
    pub record_start: u64,
    /// A record is taken every `record_interval` completed steps after `record_start`.
    pub record_interval: u64,
    pub loss: LossKind,
    #[serde(default)]
    pub generator_objective: GeneratorObjective,
    pub optimizer: AdamConfig,
    #[serde(default)]
    pub lr_decay: bool,
    pub seed: u64,
}

/// Default share of the total steps spent in phase 1.
pub const PHASE1_FRACTION: f64 = 0.8;

impl TrainConfig {
    /// Epoch-based schedule: one epoch is `ceil(n / batch)` steps and a record
    /// is taken at the end of every epoch.
    pub fn from_epochs(
        dataset_size: usize,
        batch_size: usize,
        epochs: u64,
        phase1_fraction: f64,
        loss: LossKind,
        optimizer: AdamConfig,
        seed: u64,
    ) -> Self {
        let per_epoch = dataset_size.div_ceil(batch_size.max(1)) as u64;
        let total_steps = epochs * per_epoch;
        let phase1_epochs = (epochs as f64 * phase1_fraction).round() as u64;
        TrainConfig {
            batch_size,
            total_steps,
            phase1_steps: phase1_epochs * per_epoch,
            record_start: 0,
            record_interval: per_epoch,
            loss,
            generator_objective: GeneratorObjective::Standard,
            optimizer,
            lr_decay: false,
            seed,
        }
    }

    pub fn phase2_steps(&self) -> u64 {
        self.total_steps - self.phase1_steps
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.phase1_steps > self.total_steps {
            return Err(Error::Config("phase-1 steps exceed total steps".into()));
        }
        if self.record_start > self.phase1_steps {
            return Err(Error::Config("recording starts after phase 1 ends".into()));
        }
        if self.record_interval == 0 {
            return Err(Error::Config("record interval must be positive".into()));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if let GeneratorObjective::TopK { fraction } = self.generator_objective {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::Config(format!("top-k fraction {fraction} outside (0, 1]")));
            }
        }
        if self.loss == LossKind::Hinge && self.generator_objective != GeneratorObjective::Standard {
            return Err(Error::Config("top-k and GOLD generator updates need the non-saturating loss".into()));
        }
        Ok(())
    }

    /// Learning rate for the step that starts after `completed` steps.
    pub fn lr_at(&self, completed: u64) -> Result<f64> {
        if self.lr_decay {
            crate::numcore::linear_lr_decay(completed, self.total_steps, self.optimizer.lr)
        } else {
            Ok(self.optimizer.lr)
        }
    }

    pub fn records_at(&self, completed: u64) -> bool {
        completed > self.record_start && (completed - self.record_start).is_multiple_of(self.record_interval)
    }
}

/// Generator, discriminator and (after phase 1) the auxiliary
/// discriminator, with their optimizer states.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub aux: Option<Mlp>,
    pub g_opt: AdamState,
    pub d_opt: AdamState,
    pub aux_opt: Option<AdamState>,
    /// Completed training steps.
    pub step: u64,
}

impl GanModel {
    pub fn new(arch: &Architecture, loss: LossKind, optimizer: AdamConfig, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, rng::streams::INIT);
        let generator = Mlp::new(&arch.generator_dims(), Activation::Relu, Activation::Identity, &mut rng)?;
        let discriminator =
            Mlp::new(&arch.discriminator_dims(), Activation::Relu, loss.discriminator_output(), &mut rng)?;
        Ok(GanModel {
            g_opt: AdamState::new(optimizer, &generator),
            d_opt: AdamState::new(optimizer, &discriminator),
            generator,
            discriminator,
            aux: None,
            aux_opt: None,
            step: 0,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.input_dim()
    }

    /// Starts the auxiliary discriminator as a copy of the current one,
    /// optimizer state included.
    pub fn init_aux(&mut self) {
        self.aux = Some(self.discriminator.clone());
        self.aux_opt = Some(self.d_opt.clone());
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.step);
        ck.insert_network("generator", &self.generator);
        ck.insert_network("discriminator", &self.discriminator);
        ck.insert_adam("generator.adam", &self.g_opt);
        ck.insert_adam("discriminator.adam", &self.d_opt);
        if let (Some(aux), Some(opt)) = (&self.aux, &self.aux_opt) {
            ck.insert_network("aux", aux);
            ck.insert_adam("aux.adam", opt);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let aux = ck.network("aux").ok().cloned();
        let aux_opt = ck.adam("aux.adam").ok().cloned();
        if aux.is_some() != aux_opt.is_some() {
            return Err(Error::Format("auxiliary discriminator without optimizer state".into()));
        }
        Ok(GanModel {
            generator: ck.network("generator")?.clone(),
            discriminator: ck.network("discriminator")?.clone(),
            aux,
            g_opt: ck.adam("generator.adam")?.clone(),
            d_opt: ck.adam("discriminator.adam")?.clone(),
            aux_opt,
            step: ck.step,
        })
    }
}
