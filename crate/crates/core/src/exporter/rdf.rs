//! N-Triples and Turtle output with a fixed IRI scheme.
//!
//! | resource / property | IRI |
//! |---|---|
//! | article with DOI `d` | `https://doi.org/d` |
//! | article with URN `u` | `u` |
//! | dataset with DOI `d` | `https://doi.org/d` |
//! | article cites dataset | `http://purl.org/spar/cito/citesAsDataSource` |
//! | dataset title | `http://purl.org/dc/terms/title` |
//! | link status | `https://w3id.org/dataref/vocab#linkStatus` |
//!
//! Every article also gets `rdf:type fabio:Article` and a
//! `dcterms:identifier` literal, plus `dcterms:title` and
//! `prism:publicationName` when known. Characters not allowed in an IRI
//! reference are percent-encoded.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ExportError, LinkSet, Pid};

pub mod vocab {
    pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const FABIO_ARTICLE: &str = "http://purl.org/spar/fabio/Article";
    pub const CITES_AS_DATA_SOURCE: &str = "http://purl.org/spar/cito/citesAsDataSource";
    pub const DCTERMS_TITLE: &str = "http://purl.org/dc/terms/title";
    pub const DCTERMS_IDENTIFIER: &str = "http://purl.org/dc/terms/identifier";
    pub const PRISM_PUBLICATION_NAME: &str =
        "http://prismstandard.org/namespaces/basic/2.0/publicationName";
    pub const LINK_STATUS: &str = "https://w3id.org/dataref/vocab#linkStatus";
    pub const DOI_RESOLVER: &str = "https://doi.org/";

    pub const PREFIXES: [(&str, &str); 7] = [
        ("cito", "http://purl.org/spar/cito/"),
        ("dataref", "https://w3id.org/dataref/vocab#"),
        ("dcterms", "http://purl.org/dc/terms/"),
        ("fabio", "http://purl.org/spar/fabio/"),
        ("prism", "http://prismstandard.org/namespaces/basic/2.0/"),
        ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
        ("xsd", "http://www.w3.org/2001/XMLSchema#"),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdfFormat {
    NTriples,
    Turtle,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Object {
    Iri(String),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub subject: String,
    pub predicate: &'static str,
    pub object: Object,
}

fn encode_iri_part(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        if c <= ' '
            || matches!(
                c,
                '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\' | '\u{7f}'
            )
        {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                let _ = write!(out, "%{b:02X}");
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub fn dataset_iri(doi: &str) -> String {
    format!("{}{}", vocab::DOI_RESOLVER, encode_iri_part(doi.trim()))
}

pub fn article_iri(pid: &Pid) -> String {
    match pid {
        Pid::Doi(d) => dataset_iri(d),
        Pid::Urn(u) => encode_iri_part(u),
    }
}

fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

/// The graph of a link set: the article preamble plus three triples per
/// link, sorted.
pub fn triples(linkset: &LinkSet) -> Result<Vec<Triple>, ExportError> {
    let pid = linkset.validate()?;
    let article = article_iri(&pid);
    let triple = |subject: &str, predicate, object| Triple {
        subject: subject.to_owned(),
        predicate,
        object,
    };
    let mut out = vec![
        triple(
            &article,
            vocab::RDF_TYPE,
            Object::Iri(vocab::FABIO_ARTICLE.into()),
        ),
        triple(
            &article,
            vocab::DCTERMS_IDENTIFIER,
            Object::Literal(pid.to_string()),
        ),
    ];
    if let Some(title) = &linkset.article.title {
        out.push(triple(
            &article,
            vocab::DCTERMS_TITLE,
            Object::Literal(title.clone()),
        ));
    }
    if let Some(journal) = &linkset.article.journal {
        out.push(triple(
            &article,
            vocab::PRISM_PUBLICATION_NAME,
            Object::Literal(journal.clone()),
        ));
    }
    for link in &linkset.links {
        let dataset = dataset_iri(&link.doi);
        out.push(triple(
            &article,
            vocab::CITES_AS_DATA_SOURCE,
            Object::Iri(dataset.clone()),
        ));
        out.push(triple(
            &dataset,
            vocab::DCTERMS_TITLE,
            Object::Literal(link.title.clone()),
        ));
        out.push(triple(
            &dataset,
            vocab::LINK_STATUS,
            Object::Literal(link.status.as_str().into()),
        ));
    }
    out.sort();
    Ok(out)
}

fn nt_object(o: &Object) -> String {
    match o {
        Object::Iri(i) => format!("<{i}>"),
        Object::Literal(l) => format!("\"{}\"", escape_literal(l)),
    }
}

pub fn export_ntriples(linkset: &LinkSet) -> Result<String, ExportError> {
    let mut out = String::new();
    for t in triples(linkset)? {
        let _ = writeln!(
            out,
            "<{}> <{}> {} .",
            t.subject,
            t.predicate,
            nt_object(&t.object)
        );
    }
    Ok(out)
}

fn compact(iri: &str) -> String {
    for (prefix, ns) in vocab::PREFIXES {
        if let Some(local) = iri.strip_prefix(ns) {
            if !local.is_empty() && local.chars().all(|c| c.is_ascii_alphanumeric()) {
                return format!("{prefix}:{local}");
            }
        }
    }
    format!("<{iri}>")
}

pub fn export_turtle(linkset: &LinkSet) -> Result<String, ExportError> {
    let triples = triples(linkset)?;
    let mut out = String::new();
    for (prefix, ns) in vocab::PREFIXES {
        let _ = writeln!(out, "@prefix {prefix}: <{ns}> .");
    }
    let mut by_subject: BTreeMap<&str, Vec<&Triple>> = BTreeMap::new();
    for t in &triples {
        by_subject.entry(&t.subject).or_default().push(t);
    }
    for (subject, ts) in by_subject {
        let _ = write!(out, "\n<{subject}>");
        for (i, t) in ts.iter().enumerate() {
            let predicate = if t.predicate == vocab::RDF_TYPE {
                "a".to_owned()
            } else {
                compact(t.predicate)
            };
            let object = match &t.object {
                Object::Iri(iri) => compact(iri),
                lit => nt_object(lit),
            };
            let sep = if i + 1 == ts.len() { " ." } else { " ;" };
            let _ = write!(out, "\n    {predicate} {object}{sep}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export_rdf(linkset: &LinkSet, format: RdfFormat) -> Result<String, ExportError> {
    match format {
        RdfFormat::NTriples => export_ntriples(linkset),
        RdfFormat::Turtle => export_turtle(linkset),
    }
}
