//! Output formats: the sample-sink CSV (comment header lines prefixed `#`,
//! then `x_1..x_d` columns) and JSON-lines report records.

use std::io::Write;

use nalgebra::DVector;

use crate::error::Result;
use crate::walker::ChainState;

/// Writes the sample-sink CSV: `#`-prefixed metadata lines, one column
/// header row, one row per recorded point. All floats use the shortest
/// round-trip formatting, so identical runs produce identical bytes.
pub struct CsvSink<W: Write> {
    w: W,
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W) -> Self {
        Self { w }
    }

    pub fn comment(&mut self, line: &str) -> Result<()> {
        writeln!(self.w, "# {line}")?;
        Ok(())
    }

    /// Metadata block for one chain.
    pub fn chain_header(&mut self, chain: Option<u64>, seed: u64, stream: u64, r: f64, state: &ChainState) -> Result<()> {
        let prefix = match chain {
            Some(i) => format!("chain={i} "),
            None => String::new(),
        };
        self.comment(&format!("{prefix}seed={seed} stream={stream}"))?;
        self.comment(&format!("{prefix}r={r}"))?;
        self.comment(&format!(
            "{prefix}steps={} proposals={} accepted={} acceptance_rate={}",
            state.step_count,
            state.proposal_count,
            state.accept_count,
            state.acceptance_rate()
        ))?;
        Ok(())
    }

    /// `x_1,..,x_d`, optionally prefixed by a `chain` column.
    pub fn columns(&mut self, dim: usize, with_chain: bool) -> Result<()> {
        let mut cols: Vec<String> = Vec::with_capacity(dim + 1);
        if with_chain {
            cols.push("chain".into());
        }
        cols.extend((1..=dim).map(|i| format!("x_{i}")));
        self.columns_named(&cols)
    }

    /// Arbitrary column header row.
    pub fn columns_named(&mut self, names: &[String]) -> Result<()> {
        writeln!(self.w, "{}", names.join(","))?;
        Ok(())
    }

    /// A row of raw values (already in column order).
    pub fn values_row(&mut self, values: &[f64]) -> Result<()> {
        let line: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        writeln!(self.w, "{}", line.join(","))?;
        Ok(())
    }

    pub fn row(&mut self, chain: Option<u64>, x: &DVector<f64>) -> Result<()> {
        let mut line = String::new();
        if let Some(i) = chain {
            line.push_str(&i.to_string());
            line.push(',');
        }
        for (k, v) in x.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v}"));
        }
        writeln!(self.w, "{line}")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// One JSON object per line.
pub fn write_json_line<W: Write, T: serde::Serialize>(w: &mut W, record: &T) -> Result<()> {
    let line = serde_json::to_string(record)
        .map_err(|e| crate::error::Error::Numeric(format!("report serialization failed: {e}")))?;
    writeln!(w, "{line}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::PolytopeBarrier;
    use crate::potentials::Potential;
    use crate::walker::{run, ChainParams, ChainState};

    #[test]
    fn sink_format_is_stable() {
        let b = PolytopeBarrier::hypercube(2, 1.0).unwrap();
        let params = ChainParams::new(0.5, 42).unwrap();
        let mut state = ChainState::from_center(&b, &params).unwrap();
        run(&b, &Potential::uniform(), &params, &mut state, 100).unwrap();

        let render = |st: &ChainState| -> String {
            let mut buf = Vec::new();
            let mut sink = CsvSink::new(&mut buf);
            sink.chain_header(None, 42, 0, 0.5, st).unwrap();
            sink.columns(2, false).unwrap();
            sink.row(None, st.current()).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let text = render(&state);
        assert!(text.starts_with("# seed=42 stream=0\n# r=0.5\n"));
        assert!(text.contains("\nx_1,x_2\n"));
        assert_eq!(render(&state), text);
    }
}
