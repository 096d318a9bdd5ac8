# Length-of-stay GLM toolkit
