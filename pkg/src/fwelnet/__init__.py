"""Feature-weighted elastic net."""
