"""Wasserstein-geodesic augmentation of labeled ECG beats."""
