//! VCD (value change dump) export for traces.
//!
//! Header uses a 1ns timescale and one timestamp per simulation cycle.
//! Hierarchical signal paths become nested `$scope` sections; unknown bits
//! are emitted as `x`.

use crate::sim::Trace;
use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

pub fn export_vcd(trace: &Trace, out: impl AsRef<Path>) -> io::Result<()> {
    let file = std::fs::File::create(out)?;
    let mut w = io::BufWriter::new(file);
    write_vcd(trace, "top", &mut w)
}

/// VCD identifier codes: printable ASCII 33..=126, shortest first.
fn id_code(mut n: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((33 + (n % 94)) as u8 as char);
        n /= 94;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    s
}

#[derive(Default)]
struct Scope {
    vars: Vec<(String, String, u32)>, // (name, id code, width)
    children: BTreeMap<String, Scope>,
}

impl Scope {
    fn insert(&mut self, path: &[&str], leaf: (String, String, u32)) {
        match path {
            [] => self.vars.push(leaf),
            [head, rest @ ..] => self.children.entry(head.to_string()).or_default().insert(rest, leaf),
        }
    }

    fn write(&self, w: &mut impl Write, depth: usize) -> io::Result<()> {
        let pad = "  ".repeat(depth);
        for (name, code, width) in &self.vars {
            if *width == 1 {
                writeln!(w, "{pad}$var wire 1 {code} {name} $end")?;
            } else {
                writeln!(w, "{pad}$var wire {width} {code} {name} [{}:0] $end", width - 1)?;
            }
        }
        for (name, child) in &self.children {
            writeln!(w, "{pad}$scope module {name} $end")?;
            child.write(w, depth + 1)?;
            writeln!(w, "{pad}$upscope $end")?;
        }
        Ok(())
    }
}

pub fn write_vcd(trace: &Trace, top: &str, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "$version rtlmend $end")?;
    writeln!(w, "$timescale 1ns $end")?;
    writeln!(w, "$scope module {top} $end")?;

    let mut root = Scope::default();
    let mut codes: Vec<(String, u32)> = Vec::new();
    for (i, (path, seq)) in trace.signals.iter().enumerate() {
        let width = seq.first().map(|(_, v)| v.width).unwrap_or(1);
        let code = id_code(i);
        codes.push((code.clone(), width));
        let segments: Vec<&str> = path.split('.').collect();
        let (scope_path, leaf) = segments.split_at(segments.len() - 1);
        root.insert(scope_path, (leaf[0].to_string(), code, width));
    }
    root.write(w, 1)?;
    writeln!(w, "$upscope $end")?;
    writeln!(w, "$enddefinitions $end")?;

    // change records, grouped by time
    let mut by_time: BTreeMap<u64, Vec<(usize, crate::value::Value)>> = BTreeMap::new();
    for (i, (_, seq)) in trace.signals.iter().enumerate() {
        for (t, v) in seq {
            by_time.entry(*t).or_default().push((i, *v));
        }
    }
    for (t, changes) in by_time {
        writeln!(w, "#{t}")?;
        for (i, v) in changes {
            let (code, width) = &codes[i];
            if *width == 1 {
                writeln!(w, "{}{code}", v.to_bin_string())?;
            } else {
                writeln!(w, "b{} {code}", v.to_bin_string())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborate::elaborate;
    use crate::parser::parse_str;
    use crate::sim::simulate;
    use crate::stimulus::{make_stimulus, StimMode};
    use crate::value::Value;

    #[test]
    fn minimal_vcd_records() {
        let mut trace = Trace::new();
        trace.horizon = 1;
        trace.signals.insert("s".into(), vec![(0, Value::known(1, 0)), (1, Value::known(1, 1))]);
        let mut buf = Vec::new();
        write_vcd(&trace, "top", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("$timescale 1ns $end"));
        assert!(text.contains("$var wire 1 ! s $end"));
        assert!(text.contains("#0\n0!"), "missing #0 record:\n{text}");
        assert!(text.contains("#1\n1!"), "missing #1 record:\n{text}");
    }

    #[test]
    fn x_bits_emitted_as_x() {
        let mut trace = Trace::new();
        trace.signals.insert("q".into(), vec![(0, Value::all_x(4))]);
        let mut buf = Vec::new();
        write_vcd(&trace, "top", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("bxxxx "), "{text}");
    }

    #[test]
    fn hierarchical_paths_become_scopes() {
        let d = parse_str(
            "t.v",
            "module sub(input a, output wire y); assign y = ~a; endmodule\n\
             module top(input a, output wire y); sub u0 (.a(a), .y(y)); endmodule",
        );
        let e = elaborate(&d).unwrap();
        let s = make_stimulus(&e, StimMode::Exhaustive, 0, 0, None).unwrap();
        let t = simulate(&e, &s).unwrap();
        let mut buf = Vec::new();
        write_vcd(&t, "top", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("$scope module u0 $end"), "{text}");
    }
}
