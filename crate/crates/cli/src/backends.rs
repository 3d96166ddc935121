//! Service-client construction: `--mock` routes every client to an offline
//! backend; live backends need endpoint and key-env config entries.

use cadenza_core::clients::http::{HttpChat, HttpSeparator};
use cadenza_core::clients::mock::{FixtureChat, IdentitySeparator, StubJudge};
use cadenza_core::clients::limit::Bounded;
use cadenza_core::clients::{ChatClient, ClientConfig, SeparationClient};

use crate::config::{runtime, usage, CliError, Settings};

fn http_config(settings: &Settings, ep_key: &str, env_key: &str) -> Result<ClientConfig, CliError> {
    let endpoint = settings.str_opt(ep_key).ok_or_else(|| {
        usage(format!(
            "live backend needs `{ep_key}` in the config file (or pass --mock)"
        ))
    })?;
    let key_env = settings.str_opt(env_key).ok_or_else(|| {
        usage(format!(
            "live backend needs `{env_key}` in the config file (or pass --mock)"
        ))
    })?;
    let mut cfg = ClientConfig::new(endpoint, key_env);
    cfg.max_in_flight = settings.jobs;
    Ok(cfg)
}

/// Separator for `segment`: identity when mocked or separation is off.
pub fn separation_backend(
    mock: bool,
    separate: bool,
    settings: &Settings,
) -> Result<Box<dyn SeparationClient>, CliError> {
    if mock || !separate {
        return Ok(Box::new(IdentitySeparator));
    }
    let cfg = http_config(settings, "sep_endpoint", "sep_key_env")?;
    Ok(Box::new(Bounded::new(
        HttpSeparator::new(cfg).map_err(runtime)?,
        settings.jobs,
    )))
}

/// Chat model for `generate`: fixture-backed when mocked.
pub fn chat_backend(mock: bool, settings: &Settings) -> Result<Box<dyn ChatClient>, CliError> {
    if mock {
        return Ok(Box::new(Bounded::new(
            FixtureChat::new(&settings.fixtures_dir),
            settings.jobs,
        )));
    }
    live_chat(settings)
}

/// Chat client against the configured live endpoint.
pub fn live_chat(settings: &Settings) -> Result<Box<dyn ChatClient>, CliError> {
    let cfg = http_config(settings, "chat_endpoint", "chat_key_env")?;
    Ok(Box::new(Bounded::new(
        HttpChat::new(cfg).map_err(runtime)?,
        settings.jobs,
    )))
}

/// Judge for `bench oeq`: the deterministic stub when named `mock`.
pub fn judge_backend(name: &str, settings: &Settings) -> Result<Box<dyn ChatClient>, CliError> {
    if name == "mock" {
        return Ok(Box::new(Bounded::new(StubJudge, settings.jobs)));
    }
    live_chat(settings)
}

/// Backend name resolution: flag > config > `mock` (only when --mock is set).
pub fn resolve_backend_name(
    flag: Option<&str>,
    key: &str,
    mock: bool,
    settings: &Settings,
) -> Result<String, CliError> {
    if let Some(name) = flag {
        return Ok(name.to_string());
    }
    if let Some(name) = settings.str_opt(key) {
        return Ok(name.to_string());
    }
    if mock {
        return Ok("mock".to_string());
    }
    Err(usage(format!("provide --{key} <name|mock> or pass --mock")))
}
