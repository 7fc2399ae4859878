"""Domain components: stream, encoder, plasticity, recurrent, probe and verify"""
