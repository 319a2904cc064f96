//! The text file formats: design, pattern library, marker list, the per-pass
//! CSV report, and the human-readable operation log.
//!
//! All parsers report located diagnostics (1-based line and column) and
//! distinguish syntax errors (malformed tokens or structure) from semantic
//! errors (well-formed input that violates a model rule). All serializers
//! are deterministic, and `serialize(parse(s))` is byte-identical to `s` for
//! any `s` a serializer produced.

use std::fmt::Write as _;

use thiserror::Error;

use crate::autofix::{ExecOutcome, FixReport, OpLogEntry};
use crate::geom::{Dbu, LayerGeometry, Orientation, Rect};
use crate::patterns::{ErrorMarker, Pattern, PatternLibrary};
use crate::placement::{CellMaster, GridSpec, Placement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Semantic,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Semantic => "semantic error",
        })
    }
}

/// A located parse diagnostic. `line` and `col` are 1-based; `col` counts
/// bytes from the start of the line.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind} at line {line}, column {col}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn syntax(line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError { kind: ParseErrorKind::Syntax, line, col, message: message.into() }
    }

    fn semantic(line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError { kind: ParseErrorKind::Semantic, line, col, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let mut offset = 0;
    for piece in line.split_inclusive(char::is_whitespace) {
        let trimmed = piece.trim_end_matches(char::is_whitespace);
        if !trimmed.is_empty() {
            toks.push(Tok { text: trimmed, col: offset + 1 });
        }
        offset += piece.len();
    }
    toks
}

/// Line cursor that skips blank lines and `#` comment lines.
struct Cursor<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(input: &'a str) -> Cursor<'a> {
        Cursor { lines: input.lines().collect(), pos: 0 }
    }

    /// Next meaningful line as `(1-based line number, tokens)`.
    fn next(&mut self) -> Option<(usize, Vec<Tok<'a>>)> {
        while self.pos < self.lines.len() {
            let line = self.lines[self.pos];
            self.pos += 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            return Some((self.pos, tokenize(line)));
        }
        None
    }

    /// 1-based number of the line just past the end, for EOF diagnostics.
    fn eof_line(&self) -> usize {
        self.lines.len() + 1
    }
}

fn expect_count(line: usize, toks: &[Tok<'_>], n: usize, usage: &str) -> Result<(), ParseError> {
    if toks.len() < n {
        let col = toks.last().map_or(1, |t| t.col + t.text.len());
        return Err(ParseError::syntax(line, col, format!("expected {usage}")));
    }
    if toks.len() > n {
        return Err(ParseError::syntax(line, toks[n].col, format!("unexpected token after {usage}")));
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: Tok<'_>, what: &str) -> Result<T, ParseError> {
    tok.text
        .parse()
        .map_err(|_| ParseError::syntax(line, tok.col, format!("expected {what}, got `{}`", tok.text)))
}

fn parse_rect_line(line: usize, toks: &[Tok<'_>]) -> Result<(String, Rect), ParseError> {
    expect_count(line, toks, 6, "RECT <layer> <llx> <lly> <urx> <ury>")?;
    let layer = toks[1].text.to_string();
    let llx: Dbu = parse_num(line, toks[2], "integer coordinate")?;
    let lly: Dbu = parse_num(line, toks[3], "integer coordinate")?;
    let urx: Dbu = parse_num(line, toks[4], "integer coordinate")?;
    let ury: Dbu = parse_num(line, toks[5], "integer coordinate")?;
    let rect = Rect::try_new(llx, lly, urx, ury)
        .map_err(|e| ParseError::semantic(line, toks[2].col, e.to_string()))?;
    Ok((layer, rect))
}

/// Parse a design file: grid header, master blocks, then instance lines.
pub fn parse_design(input: &str) -> Result<Placement, ParseError> {
    let mut cur = Cursor::new(input);

    let (units_line, toks) = cur
        .next()
        .ok_or_else(|| ParseError::syntax(cur.eof_line(), 1, "expected UNITS <dbu_per_micron>"))?;
    if toks[0].text != "UNITS" {
        return Err(ParseError::syntax(units_line, toks[0].col, "expected UNITS <dbu_per_micron>"));
    }
    expect_count(units_line, &toks, 2, "UNITS <dbu_per_micron>")?;
    let dbu_per_um: u32 = parse_num(units_line, toks[1], "positive integer")?;
    if dbu_per_um == 0 {
        return Err(ParseError::semantic(units_line, toks[1].col, "dbu_per_micron must be positive"));
    }

    let (grid_line, toks) = cur
        .next()
        .ok_or_else(|| ParseError::syntax(cur.eof_line(), 1, "expected GRID line"))?;
    if toks[0].text != "GRID" {
        return Err(ParseError::syntax(grid_line, toks[0].col, "expected GRID <site_w> <row_h> <num_rows> <row_len_sites>"));
    }
    expect_count(grid_line, &toks, 5, "GRID <site_w> <row_h> <num_rows> <row_len_sites>")?;
    let site_w: Dbu = parse_num(grid_line, toks[1], "integer site width")?;
    let row_h: Dbu = parse_num(grid_line, toks[2], "integer row height")?;
    let num_rows: u32 = parse_num(grid_line, toks[3], "row count")?;
    let row_len_sites: u32 = parse_num(grid_line, toks[4], "row length in sites")?;

    let mut origin = (0, 0);
    let mut pending: Option<(usize, Vec<Tok<'_>>)> = cur.next();
    if let Some((line, toks)) = &pending {
        if toks[0].text == "ORIGIN" {
            expect_count(*line, toks, 3, "ORIGIN <x> <y>")?;
            origin = (
                parse_num(*line, toks[1], "integer coordinate")?,
                parse_num(*line, toks[2], "integer coordinate")?,
            );
            pending = cur.next();
        }
    }

    let grid = GridSpec { dbu_per_um, site_w, row_h, num_rows, row_len_sites, origin };
    grid.validate()
        .map_err(|e| ParseError::semantic(grid_line, 1, e.to_string()))?;

    let mut masters: Vec<CellMaster> = Vec::new();
    let mut seen_masters = std::collections::HashSet::new();
    let mut instances: Vec<(usize, usize, Vec<Tok<'_>>)> = Vec::new(); // (line, name col, toks)

    while let Some((line, toks)) = pending.take() {
        match toks[0].text {
            "MASTER" => {
                if !instances.is_empty() {
                    return Err(ParseError::syntax(line, toks[0].col, "MASTER blocks must precede INST lines"));
                }
                expect_count(line, &toks, 3, "MASTER <name> <width_sites>")?;
                let name = toks[1].text.to_string();
                let width_sites: u32 = parse_num(line, toks[2], "width in sites")?;
                if width_sites == 0 {
                    return Err(ParseError::semantic(line, toks[2].col, "master width must be at least one site"));
                }
                if width_sites > row_len_sites {
                    return Err(ParseError::semantic(
                        line,
                        toks[2].col,
                        format!("master width {width_sites} exceeds row length {row_len_sites}"),
                    ));
                }
                if !seen_masters.insert(name.clone()) {
                    return Err(ParseError::semantic(line, toks[1].col, format!("duplicate master `{name}`")));
                }
                let w_dbu = width_sites as Dbu * site_w;
                let mut geometry: Vec<LayerGeometry> = Vec::new();
                loop {
                    let Some((rline, rtoks)) = cur.next() else {
                        return Err(ParseError::syntax(
                            cur.eof_line(),
                            1,
                            format!("unexpected end of file inside MASTER `{name}` (missing END)"),
                        ));
                    };
                    match rtoks[0].text {
                        "END" => {
                            expect_count(rline, &rtoks, 1, "END")?;
                            break;
                        }
                        "RECT" => {
                            let (layer, rect) = parse_rect_line(rline, &rtoks)?;
                            if rect.llx < 0 || rect.lly < 0 || rect.urx > w_dbu || rect.ury > row_h {
                                return Err(ParseError::semantic(
                                    rline,
                                    rtoks[2].col,
                                    format!("rectangle outside cell bounds {w_dbu}x{row_h}"),
                                ));
                            }
                            match geometry.iter_mut().find(|lg| lg.layer == layer) {
                                Some(lg) => lg.rects.push(rect),
                                None => geometry.push(LayerGeometry { layer, rects: vec![rect] }),
                            }
                        }
                        other => {
                            return Err(ParseError::syntax(
                                rline,
                                rtoks[0].col,
                                format!("expected RECT or END inside MASTER block, got `{other}`"),
                            ));
                        }
                    }
                }
                masters.push(CellMaster { name, width_sites, geometry });
            }
            "INST" => {
                expect_count(line, &toks, 6, "INST <name> <master> <x_site> <row> <orient>")?;
                instances.push((line, toks[0].col, toks));
            }
            other => {
                return Err(ParseError::syntax(line, toks[0].col, format!("unknown directive `{other}`")));
            }
        }
        pending = cur.next();
    }

    let mut placement = Placement::new(grid, masters)
        .map_err(|e| ParseError::semantic(grid_line, 1, e.to_string()))?;
    for (line, _, toks) in instances {
        let name = toks[1].text;
        let master = toks[2].text;
        let x_site: u32 = parse_num(line, toks[3], "site index")?;
        let row: u32 = parse_num(line, toks[4], "row index")?;
        let orient: Orientation = toks[5]
            .text
            .parse()
            .map_err(|e: String| ParseError::syntax(line, toks[5].col, e))?;
        placement
            .add_instance(name, master, x_site, row, orient)
            .map_err(|e| ParseError::semantic(line, toks[1].col, e.to_string()))?;
    }
    Ok(placement)
}

/// Serialize a design. Masters keep library order; instances are sorted by
/// `(row, x_site)`. The ORIGIN line appears only for a non-zero origin.
pub fn serialize_design(placement: &Placement) -> String {
    let grid = placement.grid();
    let mut out = String::new();
    let _ = writeln!(out, "UNITS {}", grid.dbu_per_um);
    let _ = writeln!(
        out,
        "GRID {} {} {} {}",
        grid.site_w, grid.row_h, grid.num_rows, grid.row_len_sites
    );
    if grid.origin != (0, 0) {
        let _ = writeln!(out, "ORIGIN {} {}", grid.origin.0, grid.origin.1);
    }
    for m in placement.masters() {
        let _ = writeln!(out, "MASTER {} {}", m.name, m.width_sites);
        for lg in &m.geometry {
            for r in &lg.rects {
                let _ = writeln!(out, "RECT {} {} {} {} {}", lg.layer, r.llx, r.lly, r.urx, r.ury);
            }
        }
        out.push_str("END\n");
    }
    let mut insts: Vec<_> = placement.instances().iter().collect();
    insts.sort_by_key(|i| (i.row, i.x_site));
    for i in insts {
        let _ = writeln!(
            out,
            "INST {} {} {} {} {}",
            i.name,
            placement.master(i.master).name,
            i.x_site,
            i.row,
            i.orient
        );
    }
    out
}

/// Parse a pattern library: an optional `MATCH_MIRRORED 0|1` header (default
/// 1) followed by PATTERN blocks.
pub fn parse_patterns(input: &str) -> Result<PatternLibrary, ParseError> {
    let mut cur = Cursor::new(input);
    let mut match_mirrored = true;
    let mut patterns: Vec<Pattern> = Vec::new();
    let mut seen = std::collections::HashSet::new();

    let mut pending = cur.next();
    if let Some((line, toks)) = &pending {
        if toks[0].text == "MATCH_MIRRORED" {
            expect_count(*line, toks, 2, "MATCH_MIRRORED <0|1>")?;
            match_mirrored = match toks[1].text {
                "0" => false,
                "1" => true,
                other => {
                    return Err(ParseError::syntax(
                        *line,
                        toks[1].col,
                        format!("expected 0 or 1, got `{other}`"),
                    ));
                }
            };
            pending = cur.next();
        }
    }

    while let Some((line, toks)) = pending.take() {
        if toks[0].text != "PATTERN" {
            return Err(ParseError::syntax(
                line,
                toks[0].col,
                format!("expected PATTERN, got `{}`", toks[0].text),
            ));
        }
        expect_count(line, &toks, 4, "PATTERN <name> <window_w> <window_h>")?;
        let name = toks[1].text.to_string();
        let window_w: Dbu = parse_num(line, toks[2], "window width")?;
        let window_h: Dbu = parse_num(line, toks[3], "window height")?;
        if !seen.insert(name.clone()) {
            return Err(ParseError::semantic(line, toks[1].col, format!("duplicate pattern `{name}`")));
        }
        let mut geometry: Vec<(String, Vec<Rect>)> = Vec::new();
        loop {
            let Some((rline, rtoks)) = cur.next() else {
                return Err(ParseError::syntax(
                    cur.eof_line(),
                    1,
                    format!("unexpected end of file inside PATTERN `{name}` (missing END)"),
                ));
            };
            match rtoks[0].text {
                "END" => {
                    expect_count(rline, &rtoks, 1, "END")?;
                    break;
                }
                "RECT" => {
                    let (layer, rect) = parse_rect_line(rline, &rtoks)?;
                    if rect.llx < 0 || rect.lly < 0 || rect.urx > window_w || rect.ury > window_h {
                        return Err(ParseError::semantic(
                            rline,
                            rtoks[2].col,
                            format!("rectangle outside pattern window {window_w}x{window_h}"),
                        ));
                    }
                    match geometry.iter_mut().find(|(l, _)| *l == layer) {
                        Some((_, rects)) => rects.push(rect),
                        None => geometry.push((layer, vec![rect])),
                    }
                }
                other => {
                    return Err(ParseError::syntax(
                        rline,
                        rtoks[0].col,
                        format!("expected RECT or END inside PATTERN block, got `{other}`"),
                    ));
                }
            }
        }
        let pattern = Pattern::new(name, window_w, window_h, geometry)
            .map_err(|e| ParseError::semantic(line, toks[1].col, e.to_string()))?;
        patterns.push(pattern);
        pending = cur.next();
    }
    PatternLibrary::new(patterns, match_mirrored)
        .map_err(|e| ParseError::semantic(cur.eof_line(), 1, e.to_string()))
}

/// Serialize a pattern library with canonical geometry and an explicit
/// MATCH_MIRRORED header.
pub fn serialize_patterns(library: &PatternLibrary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MATCH_MIRRORED {}", u8::from(library.match_mirrored()));
    for p in library.patterns() {
        let _ = writeln!(out, "PATTERN {} {} {}", p.name(), p.window_w(), p.window_h());
        for (layer, rects) in p.geometry() {
            for r in rects {
                let _ = writeln!(out, "RECT {} {} {} {} {}", layer, r.llx, r.lly, r.urx, r.ury);
            }
        }
        out.push_str("END\n");
    }
    out
}

/// One marker per line, sorted by `(row, llx, pattern)`.
pub fn write_markers(markers: &[ErrorMarker]) -> String {
    let mut sorted: Vec<&ErrorMarker> = markers.iter().collect();
    sorted.sort_by_key(|m| (m.anchor_row, m.bbox.llx, &m.pattern_name));
    let mut out = String::new();
    for m in sorted {
        let _ = writeln!(
            out,
            "MARKER {} {} {} {} {} {}",
            m.pattern_name, m.anchor_row, m.bbox.llx, m.bbox.lly, m.bbox.urx, m.bbox.ury
        );
    }
    out
}

/// CSV of marker counts: row `i` is the count seen by the scan before fix
/// pass `i+1` (row 0 is the initial scan).
pub fn write_iteration_report(report: &FixReport) -> String {
    let mut out = String::from("iteration,marker_count\n");
    for (i, count) in report.iteration_counts.iter().enumerate() {
        let _ = writeln!(out, "{i},{count}");
    }
    out
}

/// Read back a CSV produced by [`write_iteration_report`].
pub fn parse_iteration_report(input: &str) -> Result<Vec<usize>, ParseError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| ParseError::syntax(1, 1, "expected `iteration,marker_count` header"))?;
    if header.trim_end() != "iteration,marker_count" {
        return Err(ParseError::syntax(1, 1, "expected `iteration,marker_count` header"));
    }
    let mut counts = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some((iter_s, count_s)) = line.split_once(',') else {
            return Err(ParseError::syntax(lineno, 1, "expected `<iteration>,<count>`"));
        };
        let iter: usize = iter_s
            .trim()
            .parse()
            .map_err(|_| ParseError::syntax(lineno, 1, format!("bad iteration `{iter_s}`")))?;
        if iter != counts.len() {
            return Err(ParseError::semantic(
                lineno,
                1,
                format!("iteration {iter} out of order (expected {})", counts.len()),
            ));
        }
        let count: usize = count_s.trim().parse().map_err(|_| {
            ParseError::syntax(lineno, iter_s.len() + 2, format!("bad marker count `{count_s}`"))
        })?;
        counts.push(count);
    }
    Ok(counts)
}

/// Exact decimal micron representation of a DBU coordinate.
///
/// When a power of ten divides by `dbu_per_um` exactly (the common case), the
/// value is printed with exactly that many decimals; otherwise it is rounded
/// half-away-from-zero to six decimals.
pub fn dbu_to_um(dbu: Dbu, dbu_per_um: u32) -> String {
    let per = dbu_per_um as i128;
    let neg = dbu < 0;
    let a = (dbu as i128).abs();
    let mut k = 0u32;
    let mut pow: i128 = 1;
    let digits = loop {
        if pow % per == 0 {
            break a * (pow / per);
        }
        k += 1;
        pow *= 10;
        if k > 9 {
            // not a 10^k divisor: round to 6 decimals
            k = 6;
            break (a * 1_000_000 + per / 2) / per;
        }
    };
    let scale = 10i128.pow(k);
    let sign = if neg { "-" } else { "" };
    if k == 0 {
        format!("{sign}{digits}")
    } else {
        format!("{sign}{}.{:0width$}", digits / scale, digits % scale, width = k as usize)
    }
}

fn um_point_pair(r: Rect, dbu_per_um: u32) -> String {
    format!(
        "{{{} {}}} {{{} {}}}",
        dbu_to_um(r.llx, dbu_per_um),
        dbu_to_um(r.lly, dbu_per_um),
        dbu_to_um(r.urx, dbu_per_um),
        dbu_to_um(r.ury, dbu_per_um)
    )
}

const LOG_RULE: &str = "#-----#\n";

fn write_log_entry(out: &mut String, entry: &OpLogEntry, dbu_per_um: u32) {
    out.push_str(LOG_RULE);
    let _ = writeln!(out, "# {:<12} {}", "Operation:", entry.op.label());
    let _ = writeln!(out, "# {:<12} {}", "Pattern:", entry.marker.pattern_name);
    let _ = writeln!(out, "# {:<12} {}", "Marker:", um_point_pair(entry.marker.bbox, dbu_per_um));
    let _ = writeln!(out, "# {:<12} {}", "Iteration:", entry.iteration);
    out.push_str(LOG_RULE);
    match &entry.outcome {
        ExecOutcome::Skipped { reason } => {
            let _ = writeln!(out, "# {:<12} {}", "Skipped:", reason);
            out.push_str(LOG_RULE);
        }
        ExecOutcome::Applied { before, after } => {
            for (title, cells) in [("Original", before), ("Modified", after)] {
                let _ = writeln!(out, "# Cell Information/Attributes [{title}]");
                for c in cells {
                    let _ = writeln!(out, "# {:<12} {}", "Cell:", c.name);
                    let _ = writeln!(out, "# {:<12} {}", "Bbox:", um_point_pair(c.bbox, dbu_per_um));
                    let _ = writeln!(out, "# {:<12} {}", "Orientation:", c.orient);
                }
                out.push_str(LOG_RULE);
            }
        }
    }
}

/// Human-readable log of every operation of a fix run, one block per
/// operation, coordinates in microns.
pub fn write_op_log(report: &FixReport, grid: &GridSpec) -> String {
    let mut out = String::new();
    for entry in &report.log {
        write_log_entry(&mut out, entry, grid.dbu_per_um);
    }
    let _ = writeln!(out, "# Status: {} after {} scans", report.status, report.iteration_counts.len());
    out
}
