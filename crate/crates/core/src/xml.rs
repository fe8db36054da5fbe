//! Helpers shared by the scene and survey XML formats.

use std::str::FromStr;

use roxmltree::Node;

pub(crate) const DECLARATION: &str = "<?xml version=\"1.0\"?>";

/// Escapes text for use inside a double-quoted attribute value.
pub(crate) fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

/// (element, reason) pair describing why a document was rejected.
pub(crate) type Rejection = (String, String);

pub(crate) fn reject(element: &str, reason: impl Into<String>) -> Rejection {
    (element.to_string(), reason.into())
}

pub(crate) fn parse_document(bytes: &[u8]) -> Result<roxmltree::Document<'_>, Rejection> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| reject("document", format!("not UTF-8: {e}")))?;
    roxmltree::Document::parse(text).map_err(|e| reject("document", e.to_string()))
}

pub(crate) fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

pub(crate) fn children<'a, 'i>(
    node: Node<'a, 'i>,
    name: &'static str,
) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(move |c| c.has_tag_name(name))
}

pub(crate) fn required_attr<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, Rejection> {
    node.attribute(name).ok_or_else(|| {
        reject(
            node.tag_name().name(),
            format!("missing attribute {name:?}"),
        )
    })
}

pub(crate) fn parse_value<T: FromStr>(
    node: Node<'_, '_>,
    name: &str,
    raw: &str,
) -> Result<T, Rejection> {
    raw.trim().parse().map_err(|_| {
        reject(
            node.tag_name().name(),
            format!("attribute {name:?} has invalid value {raw:?}"),
        )
    })
}

pub(crate) fn attr<T: FromStr>(node: Node<'_, '_>, name: &str) -> Result<T, Rejection> {
    parse_value(node, name, required_attr(node, name)?)
}

pub(crate) fn optional_attr<T: FromStr>(
    node: Node<'_, '_>,
    name: &str,
) -> Result<Option<T>, Rejection> {
    node.attribute(name)
        .map(|raw| parse_value(node, name, raw))
        .transpose()
}

/// Finite float attribute.
pub(crate) fn float_attr(node: Node<'_, '_>, name: &str) -> Result<f64, Rejection> {
    let v: f64 = attr(node, name)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(reject(
            node.tag_name().name(),
            format!("attribute {name:?} is not finite"),
        ))
    }
}
