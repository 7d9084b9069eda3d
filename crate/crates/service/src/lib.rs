//! Live animation sessions streamed over WebSocket or newline-delimited TCP.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, Payload, ServerMessage};
pub use server::{serve, Bound, ServeConfig, Server, SessionHandle, Subscription};
pub use session::{Assets, CommandLog, LogEntry, LogHeader, Session, SessionConfig, SessionError, Step};
