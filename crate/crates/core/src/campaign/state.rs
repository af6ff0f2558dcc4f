use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{CampaignState, ProfileRecord};
use crate::csvio::{design_to_csv, profile_to_csv, read_contour_csv, read_text, write_text};
use crate::error::{Error, Result};
use crate::geometry::ContourProfile;

pub const SCHEMA_VERSION: u32 = 1;
pub const CAMPAIGN_FILE: &str = "campaign.json";
pub const LOCK_FILE: &str = "campaign.lock";

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Advisory single-writer lock on a campaign directory; released on drop.
#[derive(Debug)]
pub struct CampaignLock {
    path: PathBuf,
}

impl CampaignLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for CampaignLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn profile_records(state: &CampaignState) -> Vec<(String, &ProfileRecord)> {
    let mut out = Vec::new();
    if let Some(sim) = &state.simulation {
        if let Some(b) = &sim.baseline {
            out.push(("baseline".to_owned(), b));
        }
        out.extend(
            sim.runs
                .iter()
                .map(|r| (format!("run {}", r.run), &r.result)),
        );
    }
    if let Some(v) = &state.verification {
        out.push(("optimum".to_owned(), &v.optimum));
    }
    out
}

fn profile_records_mut(state: &mut CampaignState) -> Vec<(String, &mut ProfileRecord)> {
    let mut out = Vec::new();
    if let Some(sim) = &mut state.simulation {
        if let Some(b) = &mut sim.baseline {
            out.push(("baseline".to_owned(), b));
        }
        out.extend(
            sim.runs
                .iter_mut()
                .map(|r| (format!("run {}", r.run), &mut r.result)),
        );
    }
    if let Some(v) = &mut state.verification {
        out.push(("optimum".to_owned(), &mut v.optimum));
    }
    out
}

/// Writes `campaign.json`, every profile CSV and the derived design, model
/// and optimum files.
pub fn save_state(dir: &Path, state: &CampaignState) -> Result<()> {
    state.check_lifecycle()?;
    for (name, rec) in profile_records(state) {
        let profile = rec.profile.as_ref().ok_or_else(|| Error::Integrity {
            what: name.clone(),
            detail: "profile not loaded".into(),
        })?;
        write_text(&dir.join(&rec.file), &profile_to_csv(profile))?;
    }
    if let Some(design) = &state.design {
        write_text(
            &dir.join("design.csv"),
            &design_to_csv(design, &state.config.factor_space),
        )?;
    }
    if let Some(models) = &state.models {
        write_text(
            &dir.join("models.json"),
            &(serde_json::to_string_pretty(models)? + "\n"),
        )?;
    }
    if let Some(opt) = &state.optimum {
        write_text(
            &dir.join("optimum.json"),
            &(serde_json::to_string_pretty(opt)? + "\n"),
        )?;
    }
    write_text(
        &dir.join(CAMPAIGN_FILE),
        &(serde_json::to_string_pretty(state)? + "\n"),
    )
}

/// Reads a campaign, checking schema version, lifecycle and profile hashes.
pub fn load_state(dir: &Path) -> Result<CampaignState> {
    let path = dir.join(CAMPAIGN_FILE);
    if !path.exists() {
        return Err(Error::FreshState(dir.to_path_buf()));
    }
    let text = read_text(&path)?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let version = raw
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .unwrap_or(0) as u32;
    if version != SCHEMA_VERSION {
        return Err(Error::MigrationNeeded {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let mut state: CampaignState = serde_json::from_value(raw)?;
    state.config.validate()?;
    state.check_lifecycle()?;

    for (name, rec) in profile_records_mut(&mut state) {
        let file = dir.join(&rec.file);
        let bytes = fs::read(&file).map_err(|e| Error::Integrity {
            what: name.clone(),
            detail: format!("cannot read {}: {e}", file.display()),
        })?;
        let digest = sha256_hex(&bytes);
        if digest != rec.sha256 {
            return Err(Error::Integrity {
                what: name,
                detail: format!(
                    "{} hash {digest} does not match recorded {}",
                    file.display(),
                    rec.sha256
                ),
            });
        }
        let (theta, height): (Vec<f64>, Vec<f64>) = read_contour_csv(&file)?.into_iter().unzip();
        rec.profile = Some(ContourProfile::new(theta, height)?);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::{run_pipeline, CampaignConfig};

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = CampaignLock::acquire(dir.path()).unwrap();
        assert!(matches!(
            CampaignLock::acquire(dir.path()),
            Err(Error::Locked(_))
        ));
        drop(lock);
        CampaignLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn empty_directory_needs_init() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_state(dir.path()), Err(Error::FreshState(_))));
    }

    #[test]
    fn tampered_profile_fails_integrity() {
        let dir = tempfile::tempdir().unwrap();
        let state = run_pipeline(CampaignConfig::default()).unwrap();
        save_state(dir.path(), &state).unwrap();
        let f = dir.path().join("runs/run_03.csv");
        let text = fs::read_to_string(&f).unwrap().replacen(
            "theta_rad,value_mm\n0,",
            "theta_rad,value_mm\n0,1",
            1,
        );
        fs::write(&f, text).unwrap();
        match load_state(dir.path()) {
            Err(Error::Integrity { what, .. }) => assert_eq!(what, "run 3"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_mismatch_needs_migration() {
        let dir = tempfile::tempdir().unwrap();
        let state = run_pipeline(CampaignConfig::default()).unwrap();
        save_state(dir.path(), &state).unwrap();
        let f = dir.path().join(CAMPAIGN_FILE);
        let text = fs::read_to_string(&f)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 7");
        fs::write(&f, text).unwrap();
        assert!(matches!(
            load_state(dir.path()),
            Err(Error::MigrationNeeded {
                found: 7,
                expected: 1
            })
        ));
    }
}
