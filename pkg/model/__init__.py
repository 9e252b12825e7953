"""Vision encoder, Q-Former, connectors, frozen LM and the model bundle."""
