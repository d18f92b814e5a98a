"""Exact laboratory for couplings and correlation decay in atomic CSPs."""
