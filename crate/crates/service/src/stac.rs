//! STAC 1.0.0 items describing job results.

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{json, Value as Json};

use crate::job::ResultAsset;

pub const STAC_VERSION: &str = "1.0.0";

/// One Feature per result asset. `bbox` is `[west, south, east, north]`.
pub fn make_stac_item(
    job_id: &str,
    asset: &ResultAsset,
    href: &str,
    bbox: Option<[f64; 4]>,
    datetime: DateTime<Utc>,
    provenance_href: &str,
) -> Json {
    let geometry = bbox.map(|[w, s, e, n]| {
        json!({
            "type": "Polygon",
            "coordinates": [[[w, s], [e, s], [e, n], [w, n], [w, s]]]
        })
    });
    let mut item = json!({
        "type": "Feature",
        "stac_version": STAC_VERSION,
        "id": format!("{job_id}-{}", asset.name),
        "geometry": geometry,
        "properties": {
            "datetime": datetime.to_rfc3339_opts(SecondsFormat::Millis, true),
            "pc:job_id": job_id,
        },
        "assets": {
            asset.name.clone(): {
                "href": href,
                "type": asset.format.media_type(),
                "roles": ["data"],
            }
        },
        "links": [
            {"rel": "provenance", "href": provenance_href, "type": "application/json"}
        ],
    });
    if let Some(b) = bbox {
        item["bbox"] = json!(b);
    }
    item
}
