"""Two-step BFT consensus simulator"""
