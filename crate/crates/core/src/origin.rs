use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use url::Url;

/// Scheme, host and port: the scope of a policy, a decision and a site's
/// status. Hosts are lowercased and ports are always explicit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Origin {
    scheme: String,
    host: String,
    port: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("'{0}' is not an http or https origin")]
pub struct InvalidOrigin(pub String);

impl Origin {
    pub fn new(scheme: &str, host: &str, port: u16) -> Result<Self, InvalidOrigin> {
        let scheme = scheme.to_ascii_lowercase();
        if scheme != "http" && scheme != "https" || host.is_empty() {
            return Err(InvalidOrigin(format!("{scheme}://{host}:{port}")));
        }
        Ok(Origin {
            scheme,
            host: host.to_ascii_lowercase(),
            port,
        })
    }

    pub fn from_url(url: &Url) -> Result<Self, InvalidOrigin> {
        let host = url
            .host_str()
            .ok_or_else(|| InvalidOrigin(url.to_string()))?;
        let port = url
            .port_or_known_default()
            .ok_or_else(|| InvalidOrigin(url.to_string()))?;
        Origin::new(url.scheme(), host, port)
    }

    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// Absolute URL for `path` (which must start with `/`) on this origin.
    pub fn join(&self, path: &str) -> String {
        format!("{self}{path}")
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}://{}:{}", self.scheme, self.host, self.port)
    }
}

impl FromStr for Origin {
    type Err = InvalidOrigin;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let url = Url::parse(s).map_err(|_| InvalidOrigin(s.to_string()))?;
        Origin::from_url(&url)
    }
}

impl TryFrom<String> for Origin {
    type Error = InvalidOrigin;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Origin> for String {
    fn from(o: Origin) -> String {
        o.to_string()
    }
}
