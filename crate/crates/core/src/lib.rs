// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! A deterministic model of a software-defined network whose controller
//! hands packet events to applications outside the controller through a
//! partitioned topic log.
//!
//! [`fabric`] is the data plane and [`netproto`] its wire formats.
//! [`controller`] either processes PACKET_INs in-process or publishes them to
//! the [`broker`], where [`extapps`] consume them. [`testbed`] wires one
//! deployment onto a single virtual clock and [`harness`] drives the
//! experiment scenarios.

pub mod broker;
pub mod controller;
pub mod exec;
pub mod extapps;
pub mod fabric;
pub mod harness;
pub mod netproto;
pub mod testbed;
pub(crate) mod serde_time;
pub mod time;
