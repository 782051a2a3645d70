"""
Core estimation components: kernels, local polynomial fits, pilots, selectors
"""
