use super::IngestError;

/// Accepted header spellings for one logical column.
///
/// Matching ignores case and every non-alphanumeric character, so
/// `Commercial-Delivery-Points` and `commercial delivery points` are the same
/// header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnAliases {
    pub field: &'static str,
    pub aliases: Vec<String>,
}

impl ColumnAliases {
    pub fn new(field: &'static str, aliases: &[&str]) -> Self {
        Self {
            field,
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Put `alias` in front of the defaults.
    pub fn prefer(&mut self, alias: impl Into<String>) {
        self.aliases.insert(0, alias.into());
    }

    pub(crate) fn find(&self, headers: &[String]) -> Option<usize> {
        self.aliases.iter().find_map(|alias| {
            let want = squash(alias);
            headers.iter().position(|h| squash(h) == want)
        })
    }

    pub(crate) fn require(&self, headers: &[String]) -> Result<usize, IngestError> {
        self.find(headers).ok_or_else(|| {
            IngestError::Schema(format!(
                "missing required column `{}` (accepted headers: {})",
                self.field,
                self.aliases.join(", ")
            ))
        })
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// CSV reader over an in-memory buffer with the header row decoded.
pub(crate) struct CsvTable {
    reader: csv::Reader<std::io::Cursor<Vec<u8>>>,
    pub headers: Vec<String>,
}

/// One data row; `fields` is `None` when the row is not valid UTF-8.
pub(crate) struct CsvRow {
    pub line: u64,
    pub fields: Option<Vec<String>>,
}

impl CsvTable {
    pub fn open<R: std::io::Read>(mut input: R) -> Result<Self, IngestError> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        let body = super::strip_bom(&buf).to_vec();
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(true)
            .from_reader(std::io::Cursor::new(body));
        let raw = reader.byte_headers().map_err(csv_error)?.clone();
        if raw.is_empty() || raw.iter().all(|f| f.iter().all(u8::is_ascii_whitespace)) {
            return Err(IngestError::Schema("missing header row".into()));
        }
        let headers = raw
            .iter()
            .map(|f| {
                std::str::from_utf8(f)
                    .map(|s| s.trim().to_string())
                    .map_err(|_| IngestError::Schema("header row is not valid UTF-8".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { reader, headers })
    }

    pub fn rows(&mut self) -> impl Iterator<Item = Result<CsvRow, IngestError>> + '_ {
        self.reader.byte_records().map(|rec| {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let fields = rec
                .iter()
                .map(|f| std::str::from_utf8(f).ok().map(|s| s.trim().to_string()))
                .collect::<Option<Vec<_>>>();
            Ok(CsvRow { line, fields })
        })
    }
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::Csv {
            line,
            message: format!("{other:?}"),
        },
    }
}
