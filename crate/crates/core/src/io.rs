//! FASTA encodings of oligo pools and read sets.
//!
//! Pool records: `>oe=<i> ob=<j> row=<k>` followed by the full oligo
//! (primers included) on one line. Read records: `>r<n>` optionally followed
//! by `src=<oe>:<ob>:<row>`, `off=foreign|primer`, `rc` and
//! `edits=<sub>:<ins>:<del>` tokens.

use std::io::{BufRead, Write};

use crate::channel::{EditCounts, OffTarget, ReadRecord, Source};
use crate::error::{Error, Result};
use crate::layout::{OligoRecord, PoolManifest};

/// One parsed FASTA record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastaRecord {
    pub header: String,
    pub sequence: Vec<u8>,
}

/// Parses FASTA text; sequence lines are concatenated and uppercased.
pub fn read_fasta<R: BufRead>(input: R) -> Result<Vec<FastaRecord>> {
    let mut out: Vec<FastaRecord> = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if let Some(h) = line.strip_prefix('>') {
            out.push(FastaRecord { header: h.to_string(), sequence: Vec::new() });
        } else if !line.is_empty() {
            let rec = out.last_mut().ok_or_else(|| Error::Parse(format!("line {}: sequence before header", n + 1)))?;
            rec.sequence.extend(line.bytes().map(|b| b.to_ascii_uppercase()));
        }
    }
    Ok(out)
}

pub fn write_pool<W: Write>(mut w: W, pool: &[OligoRecord], manifest: &PoolManifest) -> Result<()> {
    for o in pool {
        let primers = &manifest.extent(o.oe)?.primers;
        writeln!(w, ">oe={} ob={} row={}", o.oe, o.ob, o.row)?;
        w.write_all(&o.full_sequence(primers))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn field<'a>(token: &'a str, key: &str) -> Option<&'a str> {
    token.strip_prefix(key)?.strip_prefix('=')
}

fn parse_num(s: &str, header: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("bad number {s:?} in header {header:?}")))
}

/// Reads a pool file back; primers are stripped using the manifest.
pub fn read_pool<R: BufRead>(input: R, manifest: &PoolManifest) -> Result<Vec<OligoRecord>> {
    let plen = manifest.layout.primer_len;
    read_fasta(input)?
        .into_iter()
        .map(|rec| {
            let mut addr = [None; 3];
            for tok in rec.header.split_whitespace() {
                for (i, key) in ["oe", "ob", "row"].iter().enumerate() {
                    if let Some(v) = field(tok, key) {
                        addr[i] = Some(parse_num(v, &rec.header)?);
                    }
                }
            }
            let [Some(oe), Some(ob), Some(row)] = addr else {
                return Err(Error::Parse(format!("pool header {:?} lacks oe/ob/row", rec.header)));
            };
            if rec.sequence.len() < 2 * plen {
                return Err(Error::Parse(format!("oligo {:?} shorter than its primers", rec.header)));
            }
            let payload = rec.sequence[plen..rec.sequence.len() - plen].to_vec();
            Ok(OligoRecord { oe, ob, row, payload })
        })
        .collect()
}

pub fn write_reads<W: Write>(mut w: W, reads: &[ReadRecord], provenance: bool) -> Result<()> {
    for (i, r) in reads.iter().enumerate() {
        write!(w, ">r{i}")?;
        if provenance {
            if let Some(s) = r.source {
                write!(w, " src={}:{}:{}", s.oe, s.ob, s.row)?;
            }
            match r.off_target {
                Some(OffTarget::Foreign) => write!(w, " off=foreign")?,
                Some(OffTarget::PrimerCorrupt) => write!(w, " off=primer")?,
                None => {}
            }
            if r.reversed {
                write!(w, " rc")?;
            }
            let e = r.edits;
            write!(w, " edits={}:{}:{}", e.sub, e.ins, e.del)?;
        }
        w.write_all(b"\n")?;
        w.write_all(&r.sequence)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn triple(v: &str, header: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("expected a:b:c in header {header:?}")));
    }
    Ok([parse_num(parts[0], header)?, parse_num(parts[1], header)?, parse_num(parts[2], header)?])
}

pub fn read_reads<R: BufRead>(input: R) -> Result<Vec<ReadRecord>> {
    read_fasta(input)?
        .into_iter()
        .map(|rec| {
            let mut r = ReadRecord::plain(rec.sequence);
            for tok in rec.header.split_whitespace().skip(1) {
                if let Some(v) = field(tok, "src") {
                    let [oe, ob, row] = triple(v, &rec.header)?;
                    r.source = Some(Source { oe, ob, row });
                } else if let Some(v) = field(tok, "off") {
                    r.off_target = Some(match v {
                        "foreign" => OffTarget::Foreign,
                        "primer" => OffTarget::PrimerCorrupt,
                        _ => return Err(Error::Parse(format!("unknown off-target kind {v:?}"))),
                    });
                } else if tok == "rc" {
                    r.reversed = true;
                } else if let Some(v) = field(tok, "edits") {
                    let [sub, ins, del] = triple(v, &rec.header)?;
                    r.edits = EditCounts { sub: sub as u32, ins: ins as u32, del: del as u32 };
                }
            }
            Ok(r)
        })
        .collect()
}
