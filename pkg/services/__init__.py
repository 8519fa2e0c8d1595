"""Оркестрация экспериментов, запись результатов, наборы проверок."""
