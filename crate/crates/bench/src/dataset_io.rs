//! Training datasets as CSV: a `# link:` comment line, then
//! `predecessors,sojourn` rows.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use delta_aqm::predictor::LinkInfo;
use delta_aqm::{Dataset, TrainingSample};

use crate::BenchError;

const LINK_PREFIX: &str = "# link:";

fn format_link(link: &LinkInfo) -> String {
    let mut parts = Vec::new();
    if let Some(v) = link.gamma_concentration {
        parts.push(format!("gamma_concentration={v}"));
    }
    if let Some(v) = link.gamma_rate {
        parts.push(format!("gamma_rate={v}"));
    }
    if let Some(v) = link.utilization {
        parts.push(format!("utilization={v}"));
    }
    parts.join(",")
}

fn parse_link(text: &str) -> Result<LinkInfo, BenchError> {
    let mut link = LinkInfo::default();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| BenchError::Parse(format!("link entry without '=': {part:?}")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| BenchError::Parse(format!("link entry {key} is not a number: {value:?}")))?;
        match key {
            "gamma_concentration" => link.gamma_concentration = Some(value),
            "gamma_rate" => link.gamma_rate = Some(value),
            "utilization" => link.utilization = Some(value),
            other => return Err(BenchError::Parse(format!("unknown link entry {other:?}"))),
        }
    }
    Ok(link)
}

pub fn write_dataset<W: Write>(mut writer: W, dataset: &Dataset<f64>) -> Result<(), BenchError> {
    if let Some(link) = &dataset.link {
        writeln!(writer, "{LINK_PREFIX} {}", format_link(link)).map_err(|e| BenchError::Io(e.to_string()))?;
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["predecessors", "sojourn"])?;
    for s in &dataset.samples {
        w.write_record([s.predecessors.to_string(), s.sojourn.to_string()])?;
    }
    w.flush().map_err(|e| BenchError::Io(e.to_string()))?;
    Ok(())
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset<f64>, BenchError> {
    let mut reader = BufReader::new(reader);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| BenchError::Io(e.to_string()))?;
    let (link, rest): (Option<LinkInfo>, String) = match first.trim_end().strip_prefix(LINK_PREFIX) {
        Some(info) => (Some(parse_link(info)?), String::new()),
        None => (None, first),
    };
    let body = std::io::Cursor::new(rest).chain(reader);
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ["predecessors", "sojourn"] {
        return Err(BenchError::Parse(format!(
            "dataset header must be predecessors,sojourn, got {}",
            header.join(",")
        )));
    }
    let mut samples = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let field = |j: usize| record.get(j).unwrap_or("").trim().to_string();
        let predecessors = field(0)
            .parse()
            .map_err(|_| BenchError::Parse(format!("row {}: bad predecessors {:?}", i + 1, field(0))))?;
        let sojourn = field(1)
            .parse()
            .map_err(|_| BenchError::Parse(format!("row {}: bad sojourn {:?}", i + 1, field(1))))?;
        samples.push(TrainingSample { predecessors, sojourn });
    }
    Ok(Dataset { samples, link })
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset<f64>) -> Result<(), BenchError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    write_dataset(std::io::BufWriter::new(file), dataset)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset<f64>, BenchError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| BenchError::io(path, e))?;
    read_dataset(file)
}
