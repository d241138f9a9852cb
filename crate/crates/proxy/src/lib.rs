//! The running agent: an HTTP forward proxy that discovers each site's
//! policy, enforces the decision on live traffic, and a localhost control
//! API with a server-sent event stream for answering prompts and inspecting
//! state.

pub mod agent;
pub mod api;
pub mod config;
pub mod discovery;
pub mod events;
pub mod page;
pub mod prompts;
pub mod proxy;
pub mod server;
pub mod status;

pub use agent::Agent;
pub use config::Config;
pub use discovery::{FetchOutcome, PolicyFetchResult, PolicySource};
pub use events::Event;
pub use prompts::{Outcome, PendingPrompt, PromptError, Remember, Resolution};
pub use server::{run, start, start_with, Running, ServeError};
pub use status::SiteStatus;
