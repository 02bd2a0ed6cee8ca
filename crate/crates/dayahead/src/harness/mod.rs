//! Backtest orchestration.
