"""flexsim tests"""
