"""Elastica-based DLO surface placement toolkit."""
