use std::path::Path;

use ampo_core::{MetaPromptTemplate, TemplateRole, TemplateSet};

use crate::error::{config, Result};

/// Built-in templates, overridden by any `<role>.txt` present in `dir`.
pub fn load(dir: Option<&Path>) -> Result<TemplateSet> {
    let mut set = TemplateSet::default();
    let Some(dir) = dir else {
        return Ok(set);
    };
    if !dir.is_dir() {
        return Err(config(format!("templates directory {} not found", dir.display())));
    }
    for role in TemplateRole::ALL {
        let path = dir.join(role.file_name());
        if !path.exists() {
            continue;
        }
        let body = std::fs::read_to_string(&path)
            .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        let template = MetaPromptTemplate::new(role, body)
            .map_err(|e| config(format!("{}: {e}", path.display())))?;
        set = set.with_override(template);
    }
    Ok(set)
}
