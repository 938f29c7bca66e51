"""Error-correcting code families and reconciliation sessions."""
