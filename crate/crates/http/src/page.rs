//! The bootstrap HTML document and its embedded DELTA-SERVER message.

use spiar_core::{decode_server, CodecError, DeltaServerMessage};

pub const BOOTSTRAP_ELEMENT_ID: &str = "spiar-bootstrap";
pub const ENGINE_SCRIPT: &str = "/assets/engine.js";

/// Makes JSON text safe inside a `<script>` element. `<`, `>` and `&` only
/// ever occur inside JSON strings, where the `\u` escapes decode back to
/// the same characters.
fn escape_for_script(json: &str) -> String {
    let mut out = String::with_capacity(json.len());
    for ch in json.chars() {
        match ch {
            '<' => out.push_str("\\u003c"),
            '>' => out.push_str("\\u003e"),
            '&' => out.push_str("\\u0026"),
            '\u{2028}' => out.push_str("\\u2028"),
            '\u{2029}' => out.push_str("\\u2029"),
            c => out.push(c),
        }
    }
    out
}

pub fn bootstrap_page(encoded: &[u8]) -> String {
    let json = escape_for_script(&String::from_utf8_lossy(encoded));
    format!(
        "<!DOCTYPE html>\n\
         <html>\n\
         <head>\n<meta charset=\"utf-8\">\n<title>SPIAR</title>\n</head>\n\
         <body>\n\
         <div id=\"spiar-root\"></div>\n\
         <script id=\"{BOOTSTRAP_ELEMENT_ID}\" type=\"application/json\">{json}</script>\n\
         <script src=\"{ENGINE_SCRIPT}\"></script>\n\
         </body>\n\
         </html>\n"
    )
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("no bootstrap element in page")]
    Missing,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Raw JSON text of the embedded bootstrap message.
pub fn bootstrap_json(html: &str) -> Option<&str> {
    let open = format!("<script id=\"{BOOTSTRAP_ELEMENT_ID}\" type=\"application/json\">");
    let start = html.find(&open)? + open.len();
    let len = html[start..].find("</script>")?;
    Some(&html[start..start + len])
}

/// Decodes the bootstrap message embedded in a page served by `GET /app`.
pub fn extract_bootstrap(html: &str) -> Result<DeltaServerMessage, ExtractError> {
    let json = bootstrap_json(html).ok_or(ExtractError::Missing)?;
    Ok(decode_server(json.as_bytes())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spiar_core::{encode_server, DeltaDirective, RepresentationalNode, WidgetType};

    #[test]
    fn script_breakers_are_escaped_and_recovered() {
        let node = RepresentationalNode {
            id: "c1".parse().unwrap(),
            widget: WidgetType::Window,
            properties: Default::default(),
            listened: Default::default(),
            children: vec![RepresentationalNode {
                id: "c2".parse().unwrap(),
                widget: WidgetType::Label,
                properties: [("text".to_owned(), "</script><!-- & \u{2028}".into())].into(),
                listened: Default::default(),
                children: vec![],
            }],
        };
        let msg = DeltaServerMessage {
            session: "s".into(),
            ack: 0,
            directives: vec![DeltaDirective::Create {
                parent: None,
                index: 0,
                node,
            }],
            fragment: None,
        };
        let page = bootstrap_page(&encode_server(&msg).unwrap());
        assert_eq!(page.matches("</script>").count(), 2);
        assert!(!bootstrap_json(&page).unwrap().contains('<'));
        assert_eq!(extract_bootstrap(&page).unwrap(), msg);
    }

    #[test]
    fn missing_element() {
        assert!(matches!(
            extract_bootstrap("<html></html>"),
            Err(ExtractError::Missing)
        ));
    }
}
