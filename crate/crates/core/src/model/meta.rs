use std::cmp::Ordering;

use serde_json::{Map, Value as Json};

use super::{Timestamp, Value};

/// Structured payload attached to a meta record.
pub type Detail = Map<String, Json>;

/// One entry of the quality meta-stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaRecord {
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub key: Option<Value>,
    pub check_id: String,
    pub value: Value,
    pub ok: bool,
    pub detail: Option<Detail>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("malformed meta record: {0}")]
pub struct MetaParseError(String);

const FIELDS: [&str; 7] = ["window_start", "window_end", "key", "check", "value", "ok", "detail"];

impl MetaRecord {
    /// Arrival sequence of the element a per-element record refers to.
    pub fn element_ref(&self) -> Option<u64> {
        self.detail.as_ref()?.get("element_ref")?.as_u64()
    }

    pub fn detail_field(&self, name: &str) -> Option<&Json> {
        self.detail.as_ref()?.get(name)
    }

    /// Output order of the meta-stream: `(window_end, key, check_id)`, then
    /// window-level records before per-element ones.
    pub fn stream_order(&self, other: &MetaRecord) -> Ordering {
        (
            self.window_end,
            &self.key,
            &self.check_id,
            self.element_ref(),
            self.window_start,
        )
            .cmp(&(
                other.window_end,
                &other.key,
                &other.check_id,
                other.element_ref(),
                other.window_start,
            ))
    }

    /// One JSON object with a fixed key order, no trailing newline.
    pub fn to_json_line(&self) -> String {
        let mut out = String::with_capacity(160);
        out.push_str("{\"window_start\":\"");
        out.push_str(&self.window_start.to_iso());
        out.push_str("\",\"window_end\":\"");
        out.push_str(&self.window_end.to_iso());
        out.push_str("\",\"key\":");
        match &self.key {
            Some(k) => out.push_str(&k.to_json().to_string()),
            None => out.push_str("null"),
        }
        out.push_str(",\"check\":");
        out.push_str(&Json::String(self.check_id.clone()).to_string());
        out.push_str(",\"value\":");
        out.push_str(&self.value.to_json().to_string());
        out.push_str(",\"ok\":");
        out.push_str(if self.ok { "true" } else { "false" });
        out.push_str(",\"detail\":");
        match &self.detail {
            Some(d) => out.push_str(&Json::Object(d.clone()).to_string()),
            None => out.push_str("null"),
        }
        out.push('}');
        out
    }

    pub fn from_json_line(line: &str) -> Result<MetaRecord, MetaParseError> {
        let err = |m: String| MetaParseError(m);
        let json: Json = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let Json::Object(map) = json else {
            return Err(err("expected a JSON object".into()));
        };
        let keys: Vec<&str> = map.keys().map(String::as_str).collect();
        if keys != FIELDS {
            return Err(err(format!("expected keys {FIELDS:?}, found {keys:?}")));
        }
        let ts = |name: &str| -> Result<Timestamp, MetaParseError> {
            map[name]
                .as_str()
                .and_then(Timestamp::parse_iso)
                .ok_or_else(|| err(format!("`{name}` must be an ISO-8601 timestamp")))
        };
        let key = match &map["key"] {
            Json::Null => None,
            other => Some(Value::from_json(other).map_err(err)?),
        };
        let detail = match &map["detail"] {
            Json::Null => None,
            Json::Object(m) => Some(m.clone()),
            _ => return Err(err("`detail` must be an object or null".into())),
        };
        Ok(MetaRecord {
            window_start: ts("window_start")?,
            window_end: ts("window_end")?,
            key,
            check_id: map["check"]
                .as_str()
                .ok_or_else(|| err("`check` must be a string".into()))?
                .to_string(),
            value: Value::from_json(&map["value"]).map_err(err)?,
            ok: map["ok"]
                .as_bool()
                .ok_or_else(|| err("`ok` must be a boolean".into()))?,
            detail,
        })
    }
}
