//! Deterministic engine for asynchronous rendering of interactive
//! visualizations.
//!
//! Interaction requests and their late, possibly out-of-order responses
//! flow through a bounded [`chronicle::ChronicleBuffer`] whose policy emits
//! screen directives. The [`scheduler`] and [`latency`] modules drive
//! headless simulations, [`workload`] provides tasks and simulated users,
//! [`analytics`] measures the resulting traces, and [`session`] ties it
//! together for simulations, replay and live sessions.

pub mod analytics;
pub mod chronicle;
pub mod latency;
pub mod scheduler;
pub mod session;
pub mod trace;
pub mod workload;
