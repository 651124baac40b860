use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Where a line stream goes: `-` (stdout), `tcp://host:port`, or a file path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SinkTarget {
    Stdout,
    Socket(String),
    File(PathBuf),
}

impl SinkTarget {
    pub fn resolve_paths(&mut self, base: &Path) {
        if let SinkTarget::File(p) = self {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

impl FromStr for SinkTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" => Err("empty sink target".into()),
            "-" | "stdout" => Ok(SinkTarget::Stdout),
            _ => match s.strip_prefix("tcp://") {
                Some("") => Err("tcp sink needs host:port".into()),
                Some(addr) => Ok(SinkTarget::Socket(addr.to_string())),
                None => Ok(SinkTarget::File(PathBuf::from(s))),
            },
        }
    }
}

impl fmt::Display for SinkTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SinkTarget::Stdout => f.write_str("-"),
            SinkTarget::Socket(a) => write!(f, "tcp://{a}"),
            SinkTarget::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl Serialize for SinkTarget {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SinkTarget {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Newline-delimited record writer. Buffered; callers flush at batch boundaries.
pub struct LineSink {
    out: Box<dyn Write + Send>,
    lines: u64,
}

pub fn open_sink(target: &SinkTarget) -> io::Result<LineSink> {
    let out: Box<dyn Write + Send> = match target {
        SinkTarget::Stdout => Box::new(BufWriter::new(io::stdout())),
        SinkTarget::Socket(addr) => {
            let stream = TcpStream::connect(addr)?;
            stream.set_nodelay(true)?;
            Box::new(BufWriter::new(stream))
        }
        SinkTarget::File(path) => Box::new(BufWriter::new(File::create(path)?)),
    };
    Ok(LineSink { out, lines: 0 })
}

impl LineSink {
    pub fn from_writer(out: impl Write + Send + 'static) -> Self {
        LineSink {
            out: Box::new(out),
            lines: 0,
        }
    }

    pub fn write_line(&mut self, line: &str) -> io::Result<()> {
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn lines(&self) -> u64 {
        self.lines
    }
}

impl Drop for LineSink {
    fn drop(&mut self) {
        let _ = self.out.flush();
    }
}
