# Tests for the contribution-aware multimodal trainer
