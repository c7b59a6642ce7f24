# Feature-mapped MLPs with plain and jet forward passes
