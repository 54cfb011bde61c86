//! Minimal XML element tree with a canonical serializer.
//!
//! Templates are parsed into an owned tree. Whitespace-only text between
//! elements is dropped and text content is trimmed; everything else
//! (attribute order, comments, processing instructions, whether an empty
//! element was written self-closing) is kept so that untouched parts of a
//! template serialize the same way every time.
//!
//! Canonical form: UTF-8, LF line endings, 2-space indent, attributes in
//! insertion order.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use quick_xml::events::Event;
use quick_xml::reader::Reader;
use quick_xml::XmlVersion;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Element(Element),
    Text(String),
    CData(String),
    Comment(String),
    Pi(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Node>,
    pub self_closing: bool,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element {
            name: name.into(),
            attrs: Vec::new(),
            children: Vec::new(),
            self_closing: true,
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn set_attr(&mut self, name: &str, value: &str) {
        match self.attrs.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => slot.1 = value.to_string(),
            None => self.attrs.push((name.to_string(), value.to_string())),
        }
    }

    pub fn child_elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            _ => None,
        })
    }

    /// First child element named `name`.
    pub fn child(&self, name: &str) -> Option<&Element> {
        self.child_elements().find(|e| e.name == name)
    }

    /// Concatenated text content of direct text children.
    pub fn text(&self) -> String {
        self.children
            .iter()
            .filter_map(|n| match n {
                Node::Text(t) | Node::CData(t) => Some(t.as_str()),
                _ => None,
            })
            .collect()
    }

    fn nth_child_index(&self, name: &str, k: usize) -> Option<usize> {
        self.children
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Element(e) if e.name == name))
            .nth(k)
            .map(|(i, _)| i)
    }
}

/// Parsed template file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlTree {
    /// Declaration, doctype, comments and PIs before the root, verbatim.
    prolog: Vec<String>,
    pub root: Element,
    pub source_path: Option<PathBuf>,
}

impl XmlTree {
    pub fn new(root: Element) -> Self {
        XmlTree {
            prolog: Vec::new(),
            root,
            source_path: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        let mut tree = Self::parse(&text)?;
        tree.source_path = Some(path.to_path_buf());
        Ok(tree)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = Reader::from_str(text);
        let config = reader.config_mut();
        config.check_end_names = true;
        config.expand_empty_elements = false;

        let err_at = |pos: u64, msg: String| {
            let (line, column) = line_col(text, pos as usize);
            Error::XmlParse { line, column, msg }
        };

        let mut prolog = Vec::new();
        let mut stack: Vec<Element> = Vec::new();
        let mut root: Option<Element> = None;
        let mut pending_text = String::new();

        loop {
            let event = reader
                .read_event()
                .map_err(|e| err_at(reader.error_position(), e.to_string()))?;
            let pos = reader.buffer_position();

            // Text and entity references arrive as separate events; flush the
            // accumulated run once something else shows up.
            if !matches!(event, Event::Text(_) | Event::GeneralRef(_)) {
                let text = std::mem::take(&mut pending_text);
                let trimmed = text.trim();
                if !trimmed.is_empty() {
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(Node::Text(trimmed.to_string())),
                        None => return Err(err_at(pos, "text outside the root element".into())),
                    }
                }
            }

            match event {
                Event::Start(start) => {
                    if stack.is_empty() && root.is_some() {
                        return Err(err_at(pos, "document has more than one root element".into()));
                    }
                    stack.push(element_from(&start).map_err(|m| err_at(pos, m))?);
                }
                Event::Empty(start) => {
                    if stack.is_empty() && root.is_some() {
                        return Err(err_at(pos, "document has more than one root element".into()));
                    }
                    let elem = element_from(&start).map_err(|m| err_at(pos, m))?;
                    close_element(&mut stack, &mut root, elem);
                }
                Event::End(_) => {
                    let mut elem = stack
                        .pop()
                        .ok_or_else(|| err_at(pos, "unmatched end tag".into()))?;
                    elem.self_closing = false;
                    close_element(&mut stack, &mut root, elem);
                }
                Event::Text(t) => pending_text.push_str(&t.xml10_content()),
                Event::GeneralRef(r) => {
                    let name = r.as_ref().to_string();
                    if let Some(ch) = r.resolve_char_ref().map_err(|e| err_at(pos, e.to_string()))? {
                        pending_text.push(ch);
                    } else {
                        let resolved = match name.as_str() {
                            "amp" => '&',
                            "lt" => '<',
                            "gt" => '>',
                            "quot" => '"',
                            "apos" => '\'',
                            _ => return Err(err_at(pos, format!("unknown entity '&{name};'"))),
                        };
                        pending_text.push(resolved);
                    }
                }
                Event::CData(c) => {
                    let content = c.into_inner().into_owned();
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(Node::CData(content)),
                        None => return Err(err_at(pos, "CDATA outside the root element".into())),
                    }
                }
                Event::Comment(c) => {
                    let content = c.xml10_content().into_owned();
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(Node::Comment(content)),
                        None if root.is_none() => prolog.push(format!("<!--{content}-->")),
                        None => {}
                    }
                }
                Event::Decl(d) => {
                    let raw = d.as_ref().to_string();
                    prolog.push(format!("<?{raw}?>"));
                }
                Event::PI(p) => {
                    let raw = p.as_ref().to_string();
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(Node::Pi(raw)),
                        None if root.is_none() => prolog.push(format!("<?{raw}?>")),
                        None => {}
                    }
                }
                Event::DocType(d) => {
                    prolog.push(format!("<!DOCTYPE {}>", d.xml10_content()));
                }
                Event::Eof => break,
            }
        }

        if !stack.is_empty() {
            return Err(err_at(text.len() as u64, format!("unclosed element <{}>", stack[stack.len() - 1].name)));
        }
        let root = root.ok_or_else(|| err_at(text.len() as u64, "document has no root element".into()))?;
        Ok(XmlTree {
            prolog,
            root,
            source_path: None,
        })
    }

    /// Canonical serialization.
    pub fn to_xml_string(&self) -> String {
        let mut out = String::new();
        for line in &self.prolog {
            out.push_str(line);
            out.push('\n');
        }
        write_element(&mut out, &self.root, 0);
        out
    }

    pub fn resolve(&self, path: &ElemPath) -> Option<&Element> {
        let (first, rest) = path.segments.split_first()?;
        if first.name != self.root.name || first.index != 0 {
            return None;
        }
        let mut cur = &self.root;
        for seg in rest {
            let i = cur.nth_child_index(&seg.name, seg.index)?;
            match &cur.children[i] {
                Node::Element(e) => cur = e,
                _ => return None,
            }
        }
        Some(cur)
    }

    pub fn resolve_mut(&mut self, path: &ElemPath) -> Option<&mut Element> {
        let (first, rest) = path.segments.split_first()?;
        if first.name != self.root.name || first.index != 0 {
            return None;
        }
        let mut cur = &mut self.root;
        for seg in rest {
            let i = cur.nth_child_index(&seg.name, seg.index)?;
            match &mut cur.children[i] {
                Node::Element(e) => cur = e,
                _ => return None,
            }
        }
        Some(cur)
    }

    /// Returns a copy of the tree with `changes` applied in order.
    pub fn apply(&self, changes: &AttributeChangeSet) -> Result<XmlTree> {
        let mut tree = self.clone();
        for (index, change) in changes.iter().enumerate() {
            tree.apply_one(index, change)?;
        }
        Ok(tree)
    }

    fn apply_one(&mut self, index: usize, change: &Change) -> Result<()> {
        let path = change.elem_path()?;
        let unresolved = || Error::UnresolvedPath {
            index,
            op: change.op_name(),
            path: change.path().to_string(),
        };
        match change {
            Change::SetAttr { name, value, .. } => {
                self.resolve_mut(&path).ok_or_else(unresolved)?.set_attr(name, value);
            }
            Change::SetText { value, .. } => {
                let elem = self.resolve_mut(&path).ok_or_else(unresolved)?;
                elem.children
                    .retain(|n| !matches!(n, Node::Text(_) | Node::CData(_)));
                elem.children.insert(0, Node::Text(value.trim().to_string()));
                elem.self_closing = false;
            }
            Change::AddElem { name, value, .. } => {
                let parent = self.resolve_mut(&path).ok_or_else(unresolved)?;
                let mut child = Element::new(name.clone());
                if let Some(text) = value {
                    child.children.push(Node::Text(text.clone()));
                    child.self_closing = false;
                }
                parent.children.push(Node::Element(child));
                parent.self_closing = false;
            }
            Change::RemoveElem { .. } => {
                let (parent_path, last) = path.split_last().ok_or_else(unresolved)?;
                let parent = self.resolve_mut(&parent_path).ok_or_else(unresolved)?;
                let i = parent
                    .nth_child_index(&last.name, last.index)
                    .ok_or_else(unresolved)?;
                parent.children.remove(i);
            }
        }
        Ok(())
    }
}

fn element_from(start: &quick_xml::events::BytesStart<'_>) -> std::result::Result<Element, String> {
    let mut elem = Element::new(start.name().as_ref());
    for attr in start.attributes() {
        let attr = attr.map_err(|e| e.to_string())?;
        let value = attr
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(|e| e.to_string())?;
        elem.attrs.push((
            attr.key.as_ref().to_string(),
            value.into_owned(),
        ));
    }
    Ok(elem)
}

fn close_element(stack: &mut [Element], root: &mut Option<Element>, elem: Element) {
    match stack.last_mut() {
        Some(parent) => parent.children.push(Node::Element(elem)),
        None => *root = Some(elem),
    }
}

fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let pos = pos.min(text.len());
    let before = &text.as_bytes()[..pos];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let column = pos - before.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_element(out: &mut String, elem: &Element, depth: usize) {
    indent(out, depth);
    out.push('<');
    out.push_str(&elem.name);
    for (k, v) in &elem.attrs {
        out.push(' ');
        out.push_str(k);
        out.push_str("=\"");
        out.push_str(&escape(v, true));
        out.push('"');
    }
    if elem.children.is_empty() {
        if elem.self_closing {
            out.push_str("/>\n");
        } else {
            out.push_str("></");
            out.push_str(&elem.name);
            out.push_str(">\n");
        }
        return;
    }
    let text_only = elem
        .children
        .iter()
        .all(|n| matches!(n, Node::Text(_) | Node::CData(_)));
    out.push('>');
    if text_only {
        for n in &elem.children {
            write_inline(out, n);
        }
    } else {
        out.push('\n');
        for n in &elem.children {
            match n {
                Node::Element(e) => write_element(out, e, depth + 1),
                other => {
                    indent(out, depth + 1);
                    write_inline(out, other);
                    out.push('\n');
                }
            }
        }
        indent(out, depth);
    }
    out.push_str("</");
    out.push_str(&elem.name);
    out.push_str(">\n");
}

fn write_inline(out: &mut String, node: &Node) {
    match node {
        Node::Text(t) => out.push_str(&escape(t, false)),
        Node::CData(c) => {
            out.push_str("<![CDATA[");
            out.push_str(c);
            out.push_str("]]>");
        }
        Node::Comment(c) => {
            out.push_str("<!--");
            out.push_str(c);
            out.push_str("-->");
        }
        Node::Pi(p) => {
            out.push_str("<?");
            out.push_str(p);
            out.push_str("?>");
        }
        Node::Element(_) => unreachable!("elements are written by write_element"),
    }
}

fn escape(s: &str, attr: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\n' if attr => out.push_str("&#10;"),
            _ => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathSegment {
    pub name: String,
    pub index: usize,
}

/// Slash-separated element path, e.g. `/refsim/agents` or `/a/b[1]/c`.
///
/// Indices are zero-based among same-named siblings; a missing index means 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElemPath {
    pub segments: Vec<PathSegment>,
}

impl ElemPath {
    pub fn parse(raw: &str) -> Result<Self> {
        let bad = || Error::BadPath(raw.to_string());
        let body = raw.strip_prefix('/').unwrap_or(raw);
        if body.is_empty() {
            return Err(bad());
        }
        let mut segments = Vec::new();
        for part in body.split('/') {
            let (name, index) = match part.find('[') {
                Some(open) => {
                    let idx = part[open + 1..].strip_suffix(']').ok_or_else(bad)?;
                    (&part[..open], idx.parse::<usize>().map_err(|_| bad())?)
                }
                None => (part, 0),
            };
            if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ']') {
                return Err(bad());
            }
            segments.push(PathSegment {
                name: name.to_string(),
                index,
            });
        }
        Ok(ElemPath { segments })
    }

    pub fn split_last(&self) -> Option<(ElemPath, &PathSegment)> {
        let (last, rest) = self.segments.split_last()?;
        if rest.is_empty() {
            return None;
        }
        Some((
            ElemPath {
                segments: rest.to_vec(),
            },
            last,
        ))
    }
}

impl fmt::Display for ElemPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.segments {
            write!(f, "/{}", seg.name)?;
            if seg.index != 0 {
                write!(f, "[{}]", seg.index)?;
            }
        }
        Ok(())
    }
}

/// One XML mutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Change {
    /// Sets (or creates) attribute `name` on the element at `path`.
    SetAttr {
        path: String,
        name: String,
        value: String,
    },
    /// Appends a child element `name` under `path`, with optional text.
    AddElem {
        path: String,
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<String>,
    },
    RemoveElem { path: String },
    SetText { path: String, value: String },
}

impl Change {
    pub fn set_attr(path: impl Into<String>, name: impl Into<String>, value: impl Into<String>) -> Self {
        Change::SetAttr {
            path: path.into(),
            name: name.into(),
            value: value.into(),
        }
    }

    pub fn path(&self) -> &str {
        match self {
            Change::SetAttr { path, .. }
            | Change::AddElem { path, .. }
            | Change::RemoveElem { path }
            | Change::SetText { path, .. } => path,
        }
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            Change::SetAttr { .. } => "set_attr",
            Change::AddElem { .. } => "add_elem",
            Change::RemoveElem { .. } => "remove_elem",
            Change::SetText { .. } => "set_text",
        }
    }

    pub fn elem_path(&self) -> Result<ElemPath> {
        ElemPath::parse(self.path())
    }

    /// Key identifying the XML location this change writes, when the change
    /// is a plain value write that can conflict with another.
    pub(crate) fn write_key(&self) -> Result<Option<(String, String)>> {
        let path = self.elem_path()?;
        Ok(match self {
            Change::SetAttr { name, value, .. } => Some((format!("{path}@{name}"), value.clone())),
            Change::SetText { value, .. } => Some((format!("{path}#text"), value.clone())),
            _ => None,
        })
    }
}

/// Ordered list of XML mutations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeChangeSet(pub Vec<Change>);

impl AttributeChangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, change: Change) {
        self.0.push(change);
    }

    pub fn extend(&mut self, other: &AttributeChangeSet) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Change> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<Change> for AttributeChangeSet {
    fn from_iter<I: IntoIterator<Item = Change>>(iter: I) -> Self {
        AttributeChangeSet(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAUNCH: &str = r#"<?xml version="1.0"?>
<launch>
  <!-- common settings -->
  <agents count="4" kind="diff&amp;drive"/>
  <arena side="16"></arena>
  <node name="a">hello &lt;world&gt;</node>
  <node name="b"/>
</launch>
"#;

    #[test]
    fn parses_root_and_attrs() {
        let t = XmlTree::parse(LAUNCH).unwrap();
        assert_eq!(t.root.name, "launch");
        let agents = t.root.child("agents").unwrap();
        assert_eq!(agents.attr("kind"), Some("diff&drive"));
        assert_eq!(t.root.child("node").unwrap().text(), "hello <world>");
    }

    #[test]
    fn canonical_form_is_stable() {
        let t = XmlTree::parse(LAUNCH).unwrap();
        let once = t.to_xml_string();
        assert_eq!(XmlTree::parse(&once).unwrap().to_xml_string(), once);
        assert!(once.contains("<arena side=\"16\"></arena>"));
        assert!(once.contains("<node name=\"b\"/>"));
        assert!(once.starts_with("<?xml version=\"1.0\"?>\n<launch>\n  <!-- common settings -->\n"));
    }

    #[test]
    fn empty_changeset_is_identity() {
        let t = XmlTree::parse(LAUNCH).unwrap();
        let out = t.apply(&AttributeChangeSet::new()).unwrap();
        assert_eq!(out.to_xml_string(), t.to_xml_string());
    }

    #[test]
    fn set_attr_is_visible_after_reparse() {
        let t = XmlTree::parse(LAUNCH).unwrap();
        let cs = AttributeChangeSet(vec![
            Change::set_attr("/launch/agents", "count", "64"),
            Change::set_attr("/launch/agents", "new", "x"),
        ]);
        let out = t.apply(&cs).unwrap();
        let back = XmlTree::parse(&out.to_xml_string()).unwrap();
        let agents = back.root.child("agents").unwrap();
        assert_eq!(agents.attr("count"), Some("64"));
        assert_eq!(agents.attrs.last().unwrap().0, "new");
        // input untouched
        assert_eq!(t.root.child("agents").unwrap().attr("count"), Some("4"));
    }

    #[test]
    fn indexed_paths_and_structure_ops() {
        let t = XmlTree::parse(LAUNCH).unwrap();
        let cs = AttributeChangeSet(vec![
            Change::SetText {
                path: "/launch/node[1]".into(),
                value: "second".into(),
            },
            Change::AddElem {
                path: "/launch/arena".into(),
                name: "wall".into(),
                value: None,
            },
            Change::RemoveElem {
                path: "launch/node".into(),
            },
        ]);
        let out = t.apply(&cs).unwrap();
        let nodes: Vec<_> = out.root.child_elements().filter(|e| e.name == "node").collect();
        assert_eq!(nodes.len(), 1);
        assert_eq!(nodes[0].text(), "second");
        assert!(out.root.child("arena").unwrap().child("wall").is_some());
    }

    #[test]
    fn unresolved_paths_name_the_change() {
        let t = XmlTree::parse(LAUNCH).unwrap();
        let cs = AttributeChangeSet(vec![
            Change::set_attr("/launch/agents", "count", "1"),
            Change::RemoveElem {
                path: "/launch/missing".into(),
            },
        ]);
        match t.apply(&cs).unwrap_err() {
            Error::UnresolvedPath { index, op, path } => {
                assert_eq!(index, 1);
                assert_eq!(op, "remove_elem");
                assert_eq!(path, "/launch/missing");
            }
            e => panic!("unexpected {e}"),
        }
        let wrong_root = AttributeChangeSet(vec![Change::set_attr("/other/agents", "a", "1")]);
        assert!(t.apply(&wrong_root).is_err());
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(XmlTree::parse("").unwrap_err(), Error::XmlParse { .. }));
        assert!(matches!(XmlTree::parse("<a/><b/>").unwrap_err(), Error::XmlParse { .. }));
        match XmlTree::parse("<a>\n  <b>\n</a>").unwrap_err() {
            Error::XmlParse { line, .. } => assert!(line >= 2),
            e => panic!("unexpected {e}"),
        }
        assert!(XmlTree::parse("<a>").is_err());
        assert!(XmlTree::parse("text<a/>").is_err());
    }

    #[test]
    fn path_parsing() {
        let p = ElemPath::parse("/a/b[2]/c").unwrap();
        assert_eq!(p.to_string(), "/a/b[2]/c");
        assert_eq!(ElemPath::parse("/a/b[0]").unwrap(), ElemPath::parse("a/b").unwrap());
        for bad in ["", "/", "/a//b", "/a/b[x]", "/a/b[1"] {
            assert!(ElemPath::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn changes_serialize_with_op_tag() {
        let c = Change::set_attr("/a", "n", "1");
        let y = serde_yaml::to_string(&c).unwrap();
        assert!(y.contains("op: set_attr"));
        let back: Change = serde_yaml::from_str(&y).unwrap();
        assert_eq!(back, c);
    }
}
