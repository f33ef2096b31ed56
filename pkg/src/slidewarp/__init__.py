"""Registration of multi-resolution scans of the same tissue slice.

Pipeline stages: global affine from keypoint matching, grid-stratified
landmark selection, coarse-to-fine patch registration with mutual-
information quality gating, a least-squares affine plus residual-vector
warp model, a TRE evaluation harness, and a patch-level scanner-shift
analysis protocol.
"""

__version__ = "0.1.0"
