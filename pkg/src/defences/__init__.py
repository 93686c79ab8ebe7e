"""Defence layers: access control, zero trust, behavioural detection and quarantine."""
