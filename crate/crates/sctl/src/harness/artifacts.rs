//! Run-directory artifacts: agent checkpoint bundle and text sidecar.

use std::fs;
use std::path::Path;

use crate::error::{Result, SctlError};
use crate::lac::LacAgent;
use crate::neural::{load_mlp, save_mlp, GaussianActor};

/// Write θ, φ, φ′ checkpoints (with optimizer state for the live nets) plus a
/// text sidecar holding the dual variables, update counter, and config hash.
pub fn save_agent(dir: &Path, agent: &LacAgent, config_hash: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_mlp(&dir.join("actor.bin"), &agent.actor.trunk, Some(&agent.actor_opt))?;
    save_mlp(&dir.join("critic.bin"), &agent.critic, Some(&agent.critic_opt))?;
    save_mlp(&dir.join("target_critic.bin"), &agent.target_critic, None)?;
    let sidecar = format!(
        "beta = {:.17e}\nlambda = {:.17e}\nupdates = {}\nconfig_hash = {:016x}\n",
        agent.beta, agent.lambda, agent.update_count, config_hash
    );
    fs::write(dir.join("agent.txt"), sidecar)?;
    Ok(())
}

/// Load just the policy network for deterministic evaluation.
pub fn load_actor(dir: &Path) -> Result<GaussianActor> {
    let path = dir.join("actor.bin");
    if !path.exists() {
        return Err(SctlError::Usage(format!("no actor checkpoint at {}", path.display())));
    }
    let (trunk, _) = load_mlp(&path)?;
    if trunk.output_dim() != 2 {
        return Err(SctlError::Shape(format!(
            "actor checkpoint has output dim {}, expected 2",
            trunk.output_dim()
        )));
    }
    Ok(GaussianActor { trunk })
}
