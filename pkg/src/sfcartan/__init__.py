"""Sub-Finsler length minimizers on the Cartan group (l-infinity norm)."""
