"""Moral-epistemic trust agents: lattices, virtues, tribes and profiling."""
