//! Classical adversaries: decision trees, the correlation tester, and
//! rectangle protocols with their XOR lift.

pub mod protocol;
pub mod tester;
pub mod tree;

pub use protocol::{
    extend_protocol, random_protocol, restrict_xor_protocol, xor_lift_table, xor_lift_value, ProtocolMixture,
    Rectangle, RectangleProtocol, Restriction,
};
pub use tester::{measure_tester_advantage, CorrelationTester, TesterSource};
pub use tree::{tree_advantage_scan, DecisionTree, ScanBudget, TreeStrategy};
